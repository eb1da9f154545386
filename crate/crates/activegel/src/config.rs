//! Flat key-path configuration, hand-parsed for reproducibility: every
//! run is fully described by one small text file, no environment
//! variables (logging verbosity aside) and no hidden state.
//!
//! Grammar: one `section.key = value` per line, `#` starts a comment,
//! blank lines ignored.  Unknown keys are errors.

use std::collections::BTreeMap;

use crate::geometry::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum InitKind {
    Steady,
    Perturbed,
    TwSeed,
}

/// Full simulation configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub radius: f64,
    pub n_r: usize,
    pub n_phi: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub init_kind: InitKind,
    pub amplitude: f64,
    pub mode: usize,
    pub velocity: f64,
    pub tol_converge: f64,
    pub blowup_tol: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            params: ModelParams { zeta: 4.0, gamma: 0.3, p_h: 3.5, k_e: 0.5 },
            radius: 0.9,
            n_r: 64,
            n_phi: 128,
            dt: 1e-4,
            t_end: 1.0,
            sample_every: 100,
            init_kind: InitKind::Steady,
            amplitude: 1e-3,
            mode: 2,
            velocity: 0.05,
            tol_converge: 1e-9,
            blowup_tol: 1.0,
            seed: 7,
        }
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let prev = map.insert(key.trim().to_string(), value.trim().to_string());
            if prev.is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{}`",
                    lineno + 1,
                    key.trim()
                )));
            }
        }
        let mut cfg = SimConfig::default();
        for (key, value) in &map {
            let f = || -> Result<f64> {
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}`: expected a number, got `{value}`")))
            };
            let u = || -> Result<usize> {
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("`{key}`: expected an integer, got `{value}`")))
            };
            match key.as_str() {
                "params.zeta" => cfg.params.zeta = f()?,
                "params.gamma" => cfg.params.gamma = f()?,
                "params.p_h" => cfg.params.p_h = f()?,
                "params.k_e" => cfg.params.k_e = f()?,
                "params.radius" => cfg.radius = f()?,
                "grid.n_r" => cfg.n_r = u()?,
                "grid.n_phi" => cfg.n_phi = u()?,
                "time.dt" => cfg.dt = f()?,
                "time.t_end" => cfg.t_end = f()?,
                "time.sample_every" => cfg.sample_every = u()?,
                "init.kind" => {
                    cfg.init_kind = match value.as_str() {
                        "steady" => InitKind::Steady,
                        "perturbed" => InitKind::Perturbed,
                        "tw_seed" => InitKind::TwSeed,
                        other => {
                            return Err(Error::Config(format!(
                                "init.kind must be steady|perturbed|tw_seed, got `{other}`"
                            )))
                        }
                    }
                }
                "init.amplitude" => cfg.amplitude = f()?,
                "init.mode" => cfg.mode = u()?,
                "init.velocity" => cfg.velocity = f()?,
                "init.seed" => cfg.seed = u()? as u64,
                "events.tol_converge" => cfg.tol_converge = f()?,
                "events.blowup_tol" => cfg.blowup_tol = f()?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        if cfg.dt <= 0.0 || cfg.t_end <= 0.0 || cfg.sample_every == 0 {
            return Err(Error::Config("time.dt, time.t_end, time.sample_every must be positive".into()));
        }
        Ok(cfg)
    }

    /// Canonical text form; hashing this pins a run.
    pub fn to_text(&self) -> String {
        let kind = match self.init_kind {
            InitKind::Steady => "steady",
            InitKind::Perturbed => "perturbed",
            InitKind::TwSeed => "tw_seed",
        };
        format!(
            "params.zeta = {}\nparams.gamma = {}\nparams.p_h = {}\nparams.k_e = {}\n\
             params.radius = {}\ngrid.n_r = {}\ngrid.n_phi = {}\ntime.dt = {}\n\
             time.t_end = {}\ntime.sample_every = {}\ninit.kind = {}\n\
             init.amplitude = {}\ninit.mode = {}\ninit.velocity = {}\ninit.seed = {}\n\
             events.tol_converge = {}\nevents.blowup_tol = {}\n",
            self.params.zeta,
            self.params.gamma,
            self.params.p_h,
            self.params.k_e,
            self.radius,
            self.n_r,
            self.n_phi,
            self.dt,
            self.t_end,
            self.sample_every,
            kind,
            self.amplitude,
            self.mode,
            self.velocity,
            self.seed,
            self.tol_converge,
            self.blowup_tol,
        )
    }

    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_comments() {
        let text = "\
# a comment
params.zeta = 2.1
params.gamma = 0.75   # inline comment
grid.n_r = 48
init.kind = perturbed
init.mode = 3
";
        let cfg = SimConfig::parse(text).unwrap();
        assert_eq!(cfg.params.zeta, 2.1);
        assert_eq!(cfg.params.gamma, 0.75);
        assert_eq!(cfg.n_r, 48);
        assert_eq!(cfg.init_kind, InitKind::Perturbed);
        assert_eq!(cfg.mode, 3);
        // canonical text reparses to the same config
        let again = SimConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg.config_hash(), again.config_hash());
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        assert!(SimConfig::parse("params.bogus = 1\n").is_err());
        assert!(SimConfig::parse("params.zeta 2.0\n").is_err());
        assert!(SimConfig::parse("init.kind = sideways\n").is_err());
        assert!(SimConfig::parse("params.zeta = 1\nparams.zeta = 2\n").is_err());
    }
}
