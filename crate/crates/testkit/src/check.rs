use std::collections::HashSet;

use taxa_core::model::{CoderSession, Op, TaxonNode, TaxonPath};

fn siblings_unique(node: &TaxonNode, at: &TaxonPath) -> Result<(), String> {
    let mut seen = HashSet::new();
    for c in &node.children {
        if c.name.is_empty() || c.name.contains('/') {
            return Err(format!("bad name {:?} under {at}", c.name));
        }
        if !seen.insert(c.name.as_str()) {
            return Err(format!("duplicate sibling {:?} under {at}", c.name));
        }
        siblings_unique(c, &at.child(c.name.clone()))?;
    }
    Ok(())
}

/// Labels on existing leaves, at least one path per image, unique sibling names.
pub fn core_invariants(s: &CoderSession) -> Result<(), String> {
    siblings_unique(s.tree().root(), &TaxonPath::root())?;
    for (uuid, a) in s.labels() {
        if &a.uuid != uuid {
            return Err(format!("assignment keyed {uuid} names {}", a.uuid));
        }
        if a.paths.is_empty() {
            return Err(format!("{uuid} has no label"));
        }
        for p in &a.paths {
            match s.tree().get(p) {
                Some(n) if !p.is_root() && n.children.is_empty() => {}
                Some(_) => return Err(format!("{uuid} labeled at internal node {p}")),
                None => return Err(format!("{uuid} labeled at missing node {p}")),
            }
        }
    }
    if s.version() as usize != s.log().len() {
        return Err("version differs from log length".into());
    }
    Ok(())
}

pub fn replays_exactly(s: &CoderSession) -> Result<(), String> {
    let replayed = CoderSession::replay(s.session_id(), s.coder_id(), s.base().cloned(), s.log())
        .map_err(|e| format!("replay failed: {e}"))?;
    if &replayed == s {
        Ok(())
    } else {
        Err("replay differs from the live session".into())
    }
}

/// Applies `op` and checks the per-step contract: rejected ops change nothing,
/// accepted ops bump the version by one and conserve the image count (except
/// `load_batch`, which adds exactly its batch).
pub fn step(s: &mut CoderSession, op: Op) -> Result<bool, String> {
    let before = s.clone();
    let added = match &op {
        Op::LoadBatch { uuids } => uuids.len(),
        _ => 0,
    };
    match s.apply(op.clone()) {
        Ok(v) => {
            if v != before.version() + 1 || s.version() != v {
                return Err(format!("{op:?}: version {} -> {v}", before.version()));
            }
            if s.image_count() != before.image_count() + added {
                return Err(format!("{op:?}: image count {} -> {}", before.image_count(), s.image_count()));
            }
            core_invariants(s).map_err(|e| format!("after {op:?}: {e}"))?;
            Ok(true)
        }
        Err(_) => {
            if *s != before {
                return Err(format!("rejected {op:?} changed the session"));
            }
            Ok(false)
        }
    }
}
