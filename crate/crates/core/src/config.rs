//! Experiment configuration files.
//!
//! Flat `key = value` lines grouped under `[section]` headers. Keys before
//! the first header belong to `[experiment]`. `#` and `;` start comments.
//! Omitted keys take their defaults; unknown keys are rejected.
//!
//! ```text
//! mode = ablate
//! replications = 30
//!
//! [learning]
//! eta_status = 0.2
//! ```

use std::collections::HashSet;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{IpslError, Result};
use crate::evolution::GaConfig;
use crate::types::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Emerge,
    Evolve,
    Ablate,
}

impl FromStr for Mode {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "run" => Ok(Mode::Run),
            "emerge" => Ok(Mode::Emerge),
            "evolve" => Ok(Mode::Evolve),
            "ablate" => Ok(Mode::Ablate),
            _ => Err(()),
        }
    }
}

/// Preferential-attachment and tiering parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmergenceParams {
    pub n: usize,
    pub m: usize,
    pub f_out: f64,
    pub f_in: f64,
    /// Smallest degree entering the power-law fit.
    pub k_min: usize,
}

impl Default for EmergenceParams {
    fn default() -> Self {
        EmergenceParams { n: 10_000, m: 2, f_out: 0.1, f_in: 0.5, k_min: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub sim: SimConfig,
    pub ga: GaConfig,
    pub emergence: EmergenceParams,
    pub replications: usize,
    pub output_dir: PathBuf,
    pub master_seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn with_mode(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            sim: SimConfig::default(),
            ga: GaConfig::default(),
            emergence: EmergenceParams::default(),
            replications: 1,
            output_dir: PathBuf::from("out"),
            master_seed: 0,
            threads: 0,
        }
    }

    /// Seed of replication `index`.
    pub fn replication_seed(&self, index: usize) -> u64 {
        self.master_seed.wrapping_add(index as u64)
    }

    pub fn replication_seeds(&self) -> Vec<u64> {
        (0..self.replications).map(|i| self.replication_seed(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let to_validation = |e: IpslError| match e {
            IpslError::Config { field, reason } => {
                IpslError::Validation { key: field.to_string(), constraint: reason }
            }
            other => other,
        };
        if self.replications == 0 {
            return Err(validation("replications", "must be at least 1"));
        }
        self.sim.validate().map_err(to_validation)?;
        self.ga.validate().map_err(to_validation)?;
        let e = &self.emergence;
        if e.m == 0 {
            return Err(validation("m", "must be at least 1"));
        }
        if e.n <= e.m {
            return Err(validation("n", "must exceed m"));
        }
        if !(e.f_out > 0.0 && e.f_out < 1.0) {
            return Err(validation("f_out", "must lie in (0, 1)"));
        }
        if !(e.f_in > 0.0 && e.f_in < 1.0) {
            return Err(validation("f_in", "must lie in (0, 1)"));
        }
        if e.f_out + e.f_in >= 1.0 {
            return Err(validation("f_in", "f_out + f_in must be below 1"));
        }
        Ok(())
    }
}

fn validation(key: &str, constraint: &str) -> IpslError {
    IpslError::Validation { key: key.into(), constraint: constraint.into() }
}

const SECTIONS: [&str; 6] = ["experiment", "org", "env", "learning", "emergence", "ga"];

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| IpslError::Parse {
        line,
        message: format!("cannot parse `{raw}` as the value of `{key}`"),
    })
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(IpslError::Parse { line, message: format!("`{key}` expects true or false, got `{raw}`") }),
    }
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::with_mode(Mode::Run);
    let mut mode_seen = false;
    let mut section = "experiment";
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find(['#', ';']) {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| IpslError::Parse {
                line: line_no,
                message: format!("unterminated section header `{line}`"),
            })?;
            let name = name.trim();
            section = SECTIONS.iter().find(|s| **s == name).ok_or_else(|| IpslError::Parse {
                line: line_no,
                message: format!("unknown section `[{name}]`"),
            })?;
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| IpslError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        if !seen.insert((section.to_string(), key.to_string())) {
            return Err(IpslError::Parse { line: line_no, message: format!("duplicate key `{key}`") });
        }
        let l = line_no;
        let sim = &mut cfg.sim;
        let ga = &mut cfg.ga;
        let em = &mut cfg.emergence;
        match (section, key) {
            ("experiment", "mode") => {
                cfg.mode = value.parse().map_err(|_| IpslError::Parse {
                    line: l,
                    message: format!("unknown mode `{value}` (run, emerge, evolve, ablate)"),
                })?;
                mode_seen = true;
            }
            ("experiment", "replications") => cfg.replications = parse_value(l, key, value)?,
            ("experiment", "output_dir") => cfg.output_dir = PathBuf::from(value),
            ("experiment", "seed") => cfg.master_seed = parse_value(l, key, value)?,
            ("experiment", "threads") => cfg.threads = parse_value(l, key, value)?,

            ("org", "n_in") => sim.sizes.n_in = parse_value(l, key, value)?,
            ("org", "n_hid") => sim.sizes.n_hid = parse_value(l, key, value)?,
            ("org", "n_out") => sim.sizes.n_out = parse_value(l, key, value)?,
            ("org", "budget") => sim.budget = parse_value(l, key, value)?,
            ("org", "sigma_max") => sim.sigma_max = parse_value(l, key, value)?,
            ("org", "proposal_threshold") => sim.proposal_threshold = parse_value(l, key, value)?,

            ("env", "arrival_rate") => sim.env.arrival_rate = parse_value(l, key, value)?,
            ("env", "quality_alpha") => sim.env.quality_alpha = parse_value(l, key, value)?,
            ("env", "quality_beta") => sim.env.quality_beta = parse_value(l, key, value)?,
            ("env", "tension") => sim.env.tension = parse_value(l, key, value)?,
            ("env", "horizon") => sim.env.horizon = parse_value(l, key, value)?,

            ("learning", "tau") => sim.temperature = parse_value(l, key, value)?,
            ("learning", "eta_status") => sim.eta_status = parse_value(l, key, value)?,
            ("learning", "eta_rep") => sim.eta_rep = parse_value(l, key, value)?,
            ("learning", "normalize") => sim.normalize = parse_bool(l, key, value)?,
            ("learning", "status_floor") => sim.status_floor = parse_value(l, key, value)?,

            ("emergence", "n") => em.n = parse_value(l, key, value)?,
            ("emergence", "m") => em.m = parse_value(l, key, value)?,
            ("emergence", "f_out") => em.f_out = parse_value(l, key, value)?,
            ("emergence", "f_in") => em.f_in = parse_value(l, key, value)?,
            ("emergence", "k_min") => em.k_min = parse_value(l, key, value)?,

            ("ga", "population") => ga.population = parse_value(l, key, value)?,
            ("ga", "generations") => ga.generations = parse_value(l, key, value)?,
            ("ga", "tournament") => ga.tournament = parse_value(l, key, value)?,
            ("ga", "crossover_rate") => ga.crossover_rate = parse_value(l, key, value)?,
            ("ga", "mutation_rate") => ga.mutation_rate = parse_value(l, key, value)?,
            ("ga", "mutation_scale") => ga.mutation_scale = parse_value(l, key, value)?,
            ("ga", "elitism") => ga.elitism = parse_value(l, key, value)?,
            ("ga", "episodes") => ga.episodes = parse_value(l, key, value)?,
            ("ga", "lifetime_learning") => ga.lifetime_learning = parse_bool(l, key, value)?,
            ("ga", "benefit_origin") => ga.benefit_split[0] = parse_value(l, key, value)?,
            ("ga", "benefit_champion") => ga.benefit_split[1] = parse_value(l, key, value)?,
            ("ga", "benefit_selector") => ga.benefit_split[2] = parse_value(l, key, value)?,

            _ => return Err(IpslError::UnknownKey { line: line_no, key: format!("{section}.{key}") }),
        }
    }
    if !mode_seen {
        return Err(validation("mode", "is required (run, emerge, evolve, ablate)"));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("mode = run\n").unwrap();
        assert_eq!(cfg.mode, Mode::Run);
        assert_eq!(cfg.sim, SimConfig::default());
        assert_eq!(cfg.ga, GaConfig::default());
        assert_eq!(cfg.replications, 1);
    }

    #[test]
    fn sections_and_comments() {
        let text = "\
# experiment file
mode = ablate   ; paired runs
replications = 30
[org]
n_in = 4
[learning]
eta_status = 0.3
normalize = false
[ga]
lifetime_learning = false
[experiment]
output_dir = \"results/a b\"
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.mode, Mode::Ablate);
        assert_eq!(cfg.replications, 30);
        assert_eq!(cfg.sim.sizes.n_in, 4);
        assert_eq!(cfg.sim.eta_status, 0.3);
        assert!(!cfg.sim.normalize);
        assert!(!cfg.ga.lifetime_learning);
        assert_eq!(cfg.output_dir, PathBuf::from("results/a b"));
    }

    #[test]
    fn zero_tau_names_the_key() {
        let err = parse_config("mode = run\n[learning]\ntau = 0\n").unwrap_err();
        match err {
            IpslError::Validation { key, .. } => assert_eq!(key, "tau"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("mode = run\ntypo_key = 3\n").unwrap_err();
        assert!(matches!(err, IpslError::UnknownKey { line: 2, .. }), "{err}");
        let err = parse_config("mode = run\n[env]\nn_in = 3\n").unwrap_err();
        assert!(matches!(err, IpslError::UnknownKey { line: 3, .. }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(parse_config("mode = run\n[org\n"), Err(IpslError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("mode = run\n[org]\nbudget = two\n"), Err(IpslError::Parse { line: 3, .. })));
        assert!(matches!(parse_config("mode = fly\n"), Err(IpslError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("mode = run\nmode = run\n"), Err(IpslError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("mode run\n"), Err(IpslError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[bogus]\n"), Err(IpslError::Parse { line: 1, .. })));
    }

    #[test]
    fn mode_is_required() {
        assert!(matches!(parse_config("[org]\nn_in = 3\n"), Err(IpslError::Validation { .. })));
    }

    #[test]
    fn replication_seeds_offset_master() {
        let mut cfg = parse_config("mode = run\nseed = 40\nreplications = 3\n").unwrap();
        assert_eq!(cfg.replication_seeds(), [40, 41, 42]);
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
    }
}
