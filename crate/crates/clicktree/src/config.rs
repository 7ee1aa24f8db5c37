//! `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Keys beginning with
//! `manifest.` are run metadata and are ignored, so a manifest file can be
//! passed back as a config. Flags override file values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use clicktree_core::sim::{SimulationConfig, DEFAULT_REP_RATE_HZ, DEFAULT_WINDOW_NS};
use clicktree_core::{DetectorTree, EmitterEnsemble, NoiseModel};

use crate::error::{Error, Location, Result};

pub const KEYS: &[&str] = &[
    "emitters",
    "eta",
    "eta_per_emitter",
    "lambda",
    "noise_rate_cps",
    "channels",
    "xi",
    "weights",
    "pulses",
    "seed",
    "rep_rate_hz",
    "window_ns",
    "t0_ps",
];

const ALTERNATIVES: &[(&str, &str)] = &[("lambda", "noise_rate_cps"), ("eta", "eta_per_emitter")];

pub const MANIFEST_PREFIX: &str = "manifest.";

pub const DEFAULT_EMITTERS: usize = 1;
pub const DEFAULT_ETA: f64 = 0.1;
pub const DEFAULT_CHANNELS: usize = 4;
pub const DEFAULT_XI: f64 = 1.0;
pub const DEFAULT_PULSES: u64 = 1_000_000;

/// Unresolved assignments, in key order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ConfigMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let location = Location::Line(i as u64 + 1);
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::format(location, format!("expected `key = value`, found `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.starts_with(MANIFEST_PREFIX) {
                continue;
            }
            if map.values.contains_key(key) {
                return Err(Error::format(location, format!("duplicate key `{key}`")));
            }
            map.set(key, value).map_err(|e| Error::format(location, e.to_string()))?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::File { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(Error::config(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Apply `overrides` on top of `self`. Overriding one key of an
    /// alternative pair (`lambda` / `noise_rate_cps`, `eta` /
    /// `eta_per_emitter`) drops the other.
    pub fn merge(&mut self, overrides: &ConfigMap) {
        for (k, v) in &overrides.values {
            if let Some(&(a, b)) = ALTERNATIVES.iter().find(|(a, b)| k == a || k == b) {
                self.values.remove(if k == a { b } else { a });
            }
            self.values.insert(k.clone(), v.clone());
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key).map(|v| v.parse::<T>().map_err(|e| Error::config(key, format!("`{v}`: {e}")))).transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| Error::config(key, format!("`{x}`: {e}"))))
                    .collect()
            })
            .transpose()
    }

    /// Fill defaults and build a validated simulation config.
    pub fn resolve(&self) -> Result<RunConfig> {
        let eta_list = self.list("eta_per_emitter")?;
        let ensemble = match eta_list {
            Some(list) => {
                if self.get("eta").is_some() {
                    return Err(Error::config("eta_per_emitter", "give either eta or eta_per_emitter"));
                }
                if let Some(m) = self.parsed::<usize>("emitters")? {
                    if m != list.len() {
                        return Err(Error::config(
                            "eta_per_emitter",
                            format!("{} values for {m} emitters", list.len()),
                        ));
                    }
                }
                EmitterEnsemble::heterogeneous(list)?
            }
            None => EmitterEnsemble::uniform(
                self.parsed("emitters")?.unwrap_or(DEFAULT_EMITTERS),
                self.parsed("eta")?.unwrap_or(DEFAULT_ETA),
            )?,
        };

        let xi_list = self.list("xi")?;
        let weights = self.list("weights")?;
        let channels = match self.parsed::<usize>("channels")? {
            Some(n) => n,
            None => match (&xi_list, &weights) {
                (Some(x), _) if x.len() > 1 => x.len(),
                (_, Some(w)) => w.len(),
                _ => DEFAULT_CHANNELS,
            },
        };
        let xi = match xi_list {
            Some(x) if x.len() == 1 => vec![x[0]; channels],
            Some(x) if x.len() == channels => x,
            Some(x) => return Err(Error::config("xi", format!("{} values for {channels} channels", x.len()))),
            None => vec![DEFAULT_XI; channels],
        };
        let tree = match weights {
            Some(w) if w.len() != channels => {
                return Err(Error::config("weights", format!("{} values for {channels} channels", w.len())))
            }
            Some(w) => DetectorTree::new(xi, w)?,
            None => DetectorTree::with_efficiencies(xi)?,
        };

        let rep_rate_hz = self.parsed("rep_rate_hz")?.unwrap_or(DEFAULT_REP_RATE_HZ);
        let noise_rate_cps = self.parsed::<f64>("noise_rate_cps")?;
        let noise = match (self.parsed::<f64>("lambda")?, noise_rate_cps) {
            (Some(_), Some(_)) => return Err(Error::config("noise_rate_cps", "give either lambda or noise_rate_cps")),
            (Some(l), None) => NoiseModel::new(l)?,
            (None, Some(rate)) => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::config("noise_rate_cps", "must be finite and >= 0"));
                }
                NoiseModel::from_detected_rate(rate, rep_rate_hz, tree.subset_detection(tree.all_channels()))?
            }
            (None, None) => NoiseModel::off(),
        };

        let mut simulation = SimulationConfig::new(
            ensemble,
            noise,
            tree,
            self.parsed("pulses")?.unwrap_or(DEFAULT_PULSES),
            self.parsed("seed")?.unwrap_or(0),
        );
        simulation.rep_rate_hz = rep_rate_hz;
        simulation.window_ns = self.parsed("window_ns")?.unwrap_or(DEFAULT_WINDOW_NS);
        simulation.t0_ps = self.parsed("t0_ps")?.unwrap_or(0);
        simulation.validate()?;
        Ok(RunConfig { simulation, noise_rate_cps })
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub simulation: SimulationConfig,
    /// The detected noise rate λ was derived from, if any.
    pub noise_rate_cps: Option<f64>,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Every resolved key, in a form [`ConfigMap::parse`] reads back to the
    /// same configuration.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let s = &self.simulation;
        let mut out = vec![("emitters", s.ensemble.count().to_string())];
        match s.ensemble.eta_per_emitter() {
            Some(list) => out.push(("eta_per_emitter", join(list))),
            _ => out.push(("eta", s.ensemble.eta().to_string())),
        }
        out.extend([
            ("lambda", s.noise.lambda().to_string()),
            ("channels", s.tree.channels().to_string()),
            ("xi", join(s.tree.xi())),
            ("weights", join(s.tree.weights())),
            ("pulses", s.n_pulses.to_string()),
            ("seed", s.seed.to_string()),
            ("rep_rate_hz", s.rep_rate_hz.to_string()),
            ("window_ns", s.window_ns.to_string()),
            ("t0_ps", s.t0_ps.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        let mut text = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(text, "{k} = {v}");
        }
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let run = ConfigMap::new().resolve().unwrap();
        let s = &run.simulation;
        assert_eq!(s.tree.channels(), 4);
        assert!(s.tree.is_balanced());
        assert_eq!(s.rep_rate_hz, 5e6);
        assert_eq!(s.window_ns, 40.0);
        assert!(s.noise.is_off());
    }

    #[test]
    fn parse_with_comments_and_manifest_keys() {
        let map = ConfigMap::parse("# run\nemitters = 3\neta=0.2 # inline\n\nmanifest.command = simulate\nxi = 0.5\n")
            .unwrap();
        let run = map.resolve().unwrap();
        assert_eq!(run.simulation.ensemble.count(), 3);
        assert_eq!(run.simulation.tree.xi(), &[0.5; 4]);
    }

    #[test]
    fn rejects_bad_lines() {
        let err = ConfigMap::parse("emitters = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ConfigMap::parse("emitters\n").is_err());
        assert!(ConfigMap::parse("seed = 1\nseed = 2\n").is_err());
        let err = ConfigMap::parse("pulses = many\n").unwrap().resolve();
        assert!(err.is_err());
    }

    #[test]
    fn noise_rate_converts_to_lambda() {
        let map = ConfigMap::parse("noise_rate_cps = 25000\nxi = 0.5\n").unwrap();
        let lambda = map.resolve().unwrap().simulation.noise.lambda();
        assert!((lambda * 0.5 - 0.005).abs() < 1e-15);
        let both = ConfigMap::parse("noise_rate_cps = 1\nlambda = 1\n").unwrap();
        assert!(both.resolve().is_err());
    }

    #[test]
    fn channel_count_follows_lists() {
        let run = ConfigMap::parse("xi = 0.6, 0.2\n").unwrap().resolve().unwrap();
        assert_eq!(run.simulation.tree.channels(), 2);
        assert!(ConfigMap::parse("xi = 0.6, 0.2\nchannels = 3\n").unwrap().resolve().is_err());
        assert!(ConfigMap::parse("weights = 0.5, 0.6\n").unwrap().resolve().is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let map = ConfigMap::parse(
            "eta_per_emitter = 0.1, 0.35\nxi = 0.3, 0.9, 0.7\nweights = 0.2, 0.3, 0.5\nnoise_rate_cps = 12345\nseed = 99\n",
        )
        .unwrap();
        let run = map.resolve().unwrap();
        let again = ConfigMap::parse(&run.to_text()).unwrap().resolve().unwrap();
        assert_eq!(again.simulation, run.simulation);
    }

    #[test]
    fn flags_override_file() {
        let mut file = ConfigMap::parse("seed = 1\nemitters = 2\n").unwrap();
        let mut flags = ConfigMap::new();
        flags.set("seed", "7").unwrap();
        file.merge(&flags);
        let run = file.resolve().unwrap();
        assert_eq!(run.simulation.seed, 7);
        assert_eq!(run.simulation.ensemble.count(), 2);

        let mut file = ConfigMap::parse("noise_rate_cps = 10000\n").unwrap();
        let mut flags = ConfigMap::new();
        flags.set("lambda", "0.5").unwrap();
        file.merge(&flags);
        assert_eq!(file.resolve().unwrap().simulation.noise.lambda(), 0.5);
    }

    #[test]
    fn window_must_fit_period() {
        let map = ConfigMap::parse("rep_rate_hz = 5e7\nwindow_ns = 40\n").unwrap();
        assert!(map.resolve().is_err());
    }
}
