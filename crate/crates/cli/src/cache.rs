//! On-disk cache of DMRG-built LCM tensors in the plain-text TT format.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lattice_tt::cross::{lcm_tt, CrossConfig};
use lattice_tt::lattice::ArithFn;
use lattice_tt::tt::TTTensor;

/// File name for the key `(n, d, f, eps, seed)`.
pub fn cache_path(dir: &Path, n: usize, d: usize, f: &ArithFn, eps: f64, seed: u64) -> PathBuf {
    let fname: String = f
        .name()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    dir.join(format!("lcm_n{n}_d{d}_{fname}_eps{eps:e}_seed{seed}.tt"))
}

/// A built or cached LCM tensor. `note` describes anything the caller
/// should report (unconverged cross, unreadable cache file).
pub struct LcmTensor {
    pub tt: TTTensor,
    pub note: Option<String>,
}

pub fn load_or_build(n: usize, d: usize, f: &ArithFn, eps: f64, seed: u64, dir: Option<&Path>) -> Result<LcmTensor> {
    let mut note = None;
    if let Some(dir) = dir {
        let path = cache_path(dir, n, d, f, eps, seed);
        if path.exists() {
            let read = fs::File::open(&path)
                .map_err(anyhow::Error::from)
                .and_then(|file| Ok(TTTensor::read_text(BufReader::new(file))?));
            match read {
                Ok(tt) => return Ok(LcmTensor { tt, note: None }),
                Err(e) => note = Some(format!("n={n} d={d}: rebuilt unreadable cache {}: {e}", path.display())),
            }
        }
    }

    let cfg = CrossConfig {
        eps,
        seed,
        ..CrossConfig::default()
    };
    let res = lcm_tt(n, d, f, &cfg).with_context(|| format!("building LCM tensor n={n} d={d}"))?;
    if !res.converged {
        note = Some(format!(
            "n={n} d={d}: cross did not settle in {} sweeps (sample error {:e})",
            res.sweeps, res.sample_error
        ));
    }
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating cache dir {}", dir.display()))?;
        let path = cache_path(dir, n, d, f, eps, seed);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut buf = Vec::new();
        res.tt.write_text(&mut buf)?;
        fs::write(&tmp, buf).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(LcmTensor { tt: res.tt, note })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let first = load_or_build(3, 4, &ArithFn::Identity, 1e-14, 0, Some(dir.path())).unwrap();
        let path = cache_path(dir.path(), 3, 4, &ArithFn::Identity, 1e-14, 0);
        assert!(path.exists());
        let second = load_or_build(3, 4, &ArithFn::Identity, 1e-14, 0, Some(dir.path())).unwrap();
        assert_eq!(first.tt, second.tt);

        fs::write(&path, "garbage").unwrap();
        let third = load_or_build(3, 4, &ArithFn::Identity, 1e-14, 0, Some(dir.path())).unwrap();
        assert!(third.note.is_some());
        assert_eq!(third.tt, first.tt);
    }

    #[test]
    fn key_components() {
        let p = cache_path(Path::new("/c"), 5, 6, &ArithFn::Power(2.0), 1e-12, 3);
        assert_eq!(p, PathBuf::from("/c/lcm_n5_d6_pow2_eps1e-12_seed3.tt"));
    }
}
