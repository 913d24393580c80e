//! Loading and resolving the files referenced on the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use eqnet_core::fingerprint::sha256_hex;
use eqnet_core::nets::TensorLayerSpec;
use eqnet_core::{GroupSpec, Mode, NetworkSpec, PermutationGroup, Target, TrainConfig};

use crate::failure::{Failure, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Wide,
    Deep,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Wide => Mode::Wide,
            ModeArg::Deep => Mode::Deep,
        }
    }
}

fn read(path: &Path, what: &str) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn load_group(path: &Path) -> Outcome<(GroupSpec, Arc<PermutationGroup>)> {
    let spec = GroupSpec::from_json(&read(path, "group file")?)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let group = spec.build()?;
    Ok((spec, Arc::new(group)))
}

pub fn load_net(path: &Path) -> Outcome<NetworkSpec> {
    NetworkSpec::from_json(&read(path, "net file")?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Training experiment file: the target, how to sample it, and the
/// optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub target: Target,
    /// Uniform random samples in the domain box.
    pub samples: usize,
    /// Extra grid samples per axis (0 disables them).
    pub grid_points: usize,
    /// Points per axis of the sup-error evaluation grid.
    pub eval_grid: usize,
    pub config: TrainConfig,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self {
            target: Target::SquarePlusSum,
            samples: 4096,
            grid_points: 13,
            eval_grid: 21,
            config: TrainConfig {
                learning_rate: 3e-3,
                lr_decay: 0.99,
                eval_every: 10,
                ..Default::default()
            },
        }
    }
}

pub fn load_train(path: Option<&Path>) -> Outcome<TrainFile> {
    let Some(path) = path else {
        return Ok(TrainFile::default());
    };
    let text = read(path, "train file")?;
    let file: TrainFile =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    file.config
        .validate()
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if file.samples + file.grid_points == 0 || file.eval_grid == 0 {
        return Err(Failure::usage("train file asks for an empty dataset or grid"));
    }
    Ok(file)
}

/// The network options shared by several commands.
#[derive(Debug, Clone)]
pub struct NetChoice {
    pub group: Option<PathBuf>,
    pub net: Option<PathBuf>,
    pub mode: Option<ModeArg>,
}

/// Network spec from `--net`, with `--group` and `--mode` applied on top.
/// Without `--net` a demo architecture is derived from the group and the
/// symmetry of `target`.
pub fn resolve_spec(choice: &NetChoice, target: Option<Target>) -> Outcome<(NetworkSpec, Option<GroupSpec>)> {
    let group = choice.group.as_deref().map(load_group).transpose()?;
    let mode = choice.mode.map(Mode::from);
    let spec = match &choice.net {
        Some(path) => {
            let mut spec = load_net(path)?;
            if let Some(m) = mode {
                spec.mode = m;
            }
            if let Some((gs, _)) = &group {
                if gs.degree != spec.degree {
                    return Err(Failure::usage(format!(
                        "group degree {} does not match net degree {}",
                        gs.degree, spec.degree
                    )));
                }
                spec.group = Some(gs.clone());
            }
            spec
        }
        None => {
            let Some((_, g)) = &group else {
                return Err(Failure::usage("either --net or --group is required"));
            };
            demo_spec(g, mode.unwrap_or(Mode::Wide), target)
        }
    };
    Ok((spec, group.map(|(s, _)| s)))
}

fn demo_spec(group: &PermutationGroup, mode: Mode, target: Option<Target>) -> NetworkSpec {
    let n = group.degree();
    let (pw, rw, layers) = match mode {
        Mode::Deep => (0, 0, 2),
        _ => (32, 64, 1),
    };
    let invariant = target.is_some_and(|t| t.output_dim(n) == 1);
    let full = group.order() == (1..=n).product::<usize>();
    match (invariant, full) {
        (true, true) => NetworkSpec::invariant_sum(n, mode, pw, rw, layers),
        (true, false) => NetworkSpec::invariant_tensor(group, vec![TensorLayerSpec { order: 2, channels: 16 }]),
        _ => NetworkSpec::equivariant(group, mode, pw, rw, layers),
    }
}

/// Stable hash of everything that determines a command's output.
pub fn config_hash(command: &str, parts: Value) -> String {
    let doc = json!({ "command": command, "inputs": parts, "version": env!("CARGO_PKG_VERSION") });
    sha256_hex(doc.to_string().as_bytes())
}

pub fn ensure_dir(dir: &Path) -> Outcome<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use eqnet_core::NetKind;

    #[test]
    fn train_file_defaults_and_rejections() {
        let f: TrainFile = serde_json::from_str(r#"{"target": "sum"}"#).unwrap();
        assert_eq!(f.target, Target::Sum);
        assert_eq!(f.samples, 4096);
        assert_eq!(f.config.lr_decay, 0.99);
        assert!(serde_json::from_str::<TrainFile>(r#"{"target": "sum", "epochs": 3}"#).is_err());
    }

    #[test]
    fn hash_depends_on_every_input() {
        let a = config_hash("verify", json!({"seed": 1}));
        assert_eq!(a, config_hash("verify", json!({"seed": 1})));
        assert_ne!(a, config_hash("verify", json!({"seed": 2})));
        assert_ne!(a, config_hash("train", json!({"seed": 1})));
    }

    #[test]
    fn demo_specs_follow_the_target() {
        let s3 = PermutationGroup::symmetric(3).unwrap();
        let c3 = PermutationGroup::cyclic(3).unwrap();
        assert_eq!(demo_spec(&s3, Mode::Wide, Some(Target::Sum)).kind, NetKind::InvariantSum);
        assert_eq!(demo_spec(&c3, Mode::Wide, Some(Target::Sum)).kind, NetKind::InvariantTensor);
        assert_eq!(demo_spec(&c3, Mode::Deep, Some(Target::SquarePlusSum)).kind, NetKind::Equivariant);
        assert_eq!(demo_spec(&s3, Mode::Wide, None).kind, NetKind::Equivariant);
    }
}
