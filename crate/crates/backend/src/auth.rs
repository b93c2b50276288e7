//! Roles, principals and the login boundary.
//!
//! Logins go through [`IdentityProvider`]; the stock provider checks the
//! seeded users table. An institute single sign-on adapter would implement
//! the same trait.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ServiceError, ServiceResult};
use crate::store::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Professor,
    Admin,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Student => "student",
            Role::Professor => "professor",
            Role::Admin => "admin",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "student" => Ok(Role::Student),
            "professor" => Ok(Role::Professor),
            "admin" => Ok(Role::Admin),
            other => Err(ServiceError::Internal(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Principal {
    pub user_id: String,
    pub role: Role,
}

impl Principal {
    pub fn require(&self, role: Role, action: &str) -> ServiceResult<()> {
        if self.role == role {
            Ok(())
        } else {
            Err(ServiceError::Forbidden(format!(
                "{} {} may not {action}",
                self.role, self.user_id
            )))
        }
    }
}

pub trait IdentityProvider: Send + Sync {
    /// Checks credentials and returns the user's role.
    fn verify(&self, user_id: &str, password: &str) -> ServiceResult<Role>;
}

pub fn password_digest(password: &str) -> String {
    Sha256::digest(password.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Checks passwords against digests in the users table.
pub struct SeededUsers {
    store: Store,
}

impl SeededUsers {
    pub fn new(store: Store) -> Self {
        SeededUsers { store }
    }
}

impl IdentityProvider for SeededUsers {
    fn verify(&self, user_id: &str, password: &str) -> ServiceResult<Role> {
        let conn = self.store.conn()?;
        let row = crate::store::user_credentials(&conn, user_id)?;
        match row {
            Some((role, digest)) if digest == password_digest(password) => Ok(role),
            _ => Err(ServiceError::Unauthorized("invalid credentials".into())),
        }
    }
}

/// Extracts the token from an `Authorization: Bearer` header value.
pub fn bearer_token(header: Option<&str>) -> ServiceResult<&str> {
    let value = header.ok_or_else(|| ServiceError::Unauthorized("missing bearer token".into()))?;
    let token = value
        .strip_prefix("Bearer ")
        .or_else(|| value.strip_prefix("bearer "))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ServiceError::Unauthorized("malformed authorization header".into()))?;
    Ok(token)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bearer_parsing() {
        assert_eq!(bearer_token(Some("Bearer abc")).unwrap(), "abc");
        assert!(bearer_token(None).is_err());
        assert!(bearer_token(Some("Basic abc")).is_err());
        assert!(bearer_token(Some("Bearer ")).is_err());
    }

    #[test]
    fn digest_is_hex_sha256() {
        assert_eq!(
            password_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn roles_round_trip() {
        for r in [Role::Student, Role::Professor, Role::Admin] {
            assert_eq!(r.as_str().parse::<Role>().unwrap(), r);
        }
    }
}
