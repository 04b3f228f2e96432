//! Best-effort on-disk caching for estimate grids and partitions.
//!
//! Partition construction enumerates every type class at length `n`, which
//! is the dominant cost when the same codec is rebuilt across runs. When
//! the `REDLAB_CACHE_DIR` environment variable names a directory, built
//! grids and partitions are stored there as validated JSON and reloaded on
//! the next request. The cache is advisory: unreadable, corrupt,
//! version-mismatched, or mismatching entries are silently rebuilt, and
//! store failures are ignored. Writes go through a temporary file followed
//! by a rename so concurrent processes never observe partial entries.

use std::env;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use crate::codecs::{build_grid, build_partition, EstimateGrid, Partition};
use crate::family::ParamFamily;
use crate::Result;

/// Environment variable naming the cache directory.
pub const CACHE_ENV_VAR: &str = "REDLAB_CACHE_DIR";

/// The cache directory currently configured in the environment, if any.
pub fn cache_dir() -> Option<PathBuf> {
    dir_from(env::var_os(CACHE_ENV_VAR))
}

fn dir_from(raw: Option<OsString>) -> Option<PathBuf> {
    let raw = raw?;
    if raw.is_empty() {
        return None;
    }
    Some(PathBuf::from(raw))
}

fn family_tag(family: &ParamFamily) -> String {
    family.to_string().replace(':', "_k")
}

/// FNV-1a over the grid's defining bits, so partitions built from distinct
/// grids (e.g. singleton grids at different points) never share a cache
/// entry.
fn grid_fingerprint(grid: &EstimateGrid) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |byte: u8| {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    for byte in family_tag(&grid.family()).bytes() {
        eat(byte);
    }
    for byte in grid.m().to_le_bytes() {
        eat(byte);
    }
    for point in grid.points() {
        for &p in point.probs() {
            for byte in p.to_bits().to_le_bytes() {
                eat(byte);
            }
        }
    }
    h
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn store<T: serde::Serialize>(dir: &Path, path: &Path, value: &T) {
    let Ok(json) = serde_json::to_string(value) else {
        return;
    };
    if fs::create_dir_all(dir).is_err() {
        return;
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    if fs::write(&tmp, json).is_ok() && fs::rename(&tmp, path).is_err() {
        let _ = fs::remove_file(&tmp);
    }
}

/// [`build_grid`] through the cache directory configured in the
/// environment.
pub fn grid_cached(family: &ParamFamily, m: u32) -> Result<EstimateGrid> {
    grid_cached_in(cache_dir().as_deref(), family, m)
}

/// [`build_grid`] through an explicit cache directory (`None` disables
/// caching).
pub fn grid_cached_in(dir: Option<&Path>, family: &ParamFamily, m: u32) -> Result<EstimateGrid> {
    let Some(dir) = dir else {
        return build_grid(family, m);
    };
    let path = dir.join(format!("grid_{}_m{}.json", family_tag(family), m));
    if let Some(grid) = load::<EstimateGrid>(&path) {
        if grid.family() == *family && grid.m() == m {
            return Ok(grid);
        }
    }
    let grid = build_grid(family, m)?;
    store(dir, &path, &grid);
    Ok(grid)
}

/// [`build_partition`] through the cache directory configured in the
/// environment.
pub fn partition_cached(grid: &EstimateGrid, n: u64, class_budget: u64) -> Result<Partition> {
    partition_cached_in(cache_dir().as_deref(), grid, n, class_budget)
}

/// [`build_partition`] through an explicit cache directory (`None` disables
/// caching).
pub fn partition_cached_in(
    dir: Option<&Path>,
    grid: &EstimateGrid,
    n: u64,
    class_budget: u64,
) -> Result<Partition> {
    let Some(dir) = dir else {
        return build_partition(grid, n, class_budget);
    };
    let path = dir.join(format!(
        "partition_{}_n{}_m{}_{:016x}.json",
        family_tag(&grid.family()),
        n,
        grid.m(),
        grid_fingerprint(grid)
    ));
    if let Some(part) = load::<Partition>(&path) {
        if part.family() == grid.family()
            && part.m() == grid.m()
            && part.n() == n
            && part.a_values().len() == grid.len()
        {
            return Ok(part);
        }
    }
    let part = build_partition(grid, n, class_budget)?;
    store(dir, &path, &part);
    Ok(part)
}
