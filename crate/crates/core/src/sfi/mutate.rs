//! Deliberate breakage of the instrumentation, used to check that the
//! invariant checkers and the security tests notice.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::compile::SfiImage;
use crate::flat::FInstr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mutation {
    /// Stores write through the unmasked pointer.
    DropStoreMask,
    /// Indirect jumps go to the unmasked target.
    DropJumpAlign,
    /// Entry sequences do not push the return address.
    SkipShadowPush,
    /// Return sequences do not pop the shadow stack.
    SkipShadowPop,
}

impl Mutation {
    pub const ALL: [Mutation; 4] = [
        Mutation::DropStoreMask,
        Mutation::DropJumpAlign,
        Mutation::SkipShadowPush,
        Mutation::SkipShadowPop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::DropStoreMask => "drop-store-mask",
            Mutation::DropJumpAlign => "drop-jump-align",
            Mutation::SkipShadowPush => "skip-shadow-push",
            Mutation::SkipShadowPop => "skip-shadow-pop",
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mutation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mutation `{s}`"))
    }
}

fn put(img: &mut SfiImage, addr: i64, i: FInstr) {
    if let Some(w) = i.encode() {
        img.memory.insert(addr, w);
    }
}

/// Replaces a masked `and; or; op` triple by `nop; nop; op` on the
/// original register.
fn unmask(img: &mut SfiImage, site: i64) {
    let raw = match FInstr::decode(img.word(site - 2)) {
        Some(FInstr::And(r, _, _)) => r,
        _ => return,
    };
    let op = match FInstr::decode(img.word(site)) {
        Some(FInstr::Store(_, rs)) => FInstr::Store(raw, rs),
        Some(FInstr::Jump(_)) => FInstr::Jump(raw),
        _ => return,
    };
    put(img, site - 2, FInstr::Nop);
    put(img, site - 1, FInstr::Nop);
    put(img, site, op);
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("image has no site for {0}")]
    NoSite(Mutation),
}

/// Applies `m` at every matching site of `img`.
pub fn mutate_instrumentation(img: &SfiImage, m: Mutation) -> Result<SfiImage, MutationError> {
    let sites = match m {
        Mutation::DropStoreMask => &img.meta.store_sites,
        Mutation::DropJumpAlign => &img.meta.jump_sites,
        Mutation::SkipShadowPush => &img.meta.push_sites,
        Mutation::SkipShadowPop => &img.meta.pop_sites,
    };
    if sites.is_empty() {
        return Err(MutationError::NoSite(m));
    }
    let mut out = img.clone();
    match m {
        Mutation::DropStoreMask => {
            for a in img.meta.store_sites.iter().copied() {
                unmask(&mut out, a);
            }
        }
        Mutation::DropJumpAlign => {
            for a in img.meta.jump_sites.iter().copied() {
                unmask(&mut out, a);
            }
        }
        Mutation::SkipShadowPush => {
            for a in img.meta.push_sites.iter().copied() {
                put(&mut out, a, FInstr::Nop);
                put(&mut out, a + 2, FInstr::Nop);
            }
        }
        Mutation::SkipShadowPop => {
            for a in img.meta.pop_sites.iter().copied() {
                put(&mut out, a, FInstr::Nop);
            }
        }
    }
    Ok(out)
}
