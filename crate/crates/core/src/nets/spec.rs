use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actions::{natural_action, tensor_action};
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;
use crate::perm_group::{CosetDecomposition, GroupSpec, Permutation, PermutationGroup};
use crate::scalar::Real;

use super::build::{
    build_dense_net, build_equivariant_net, build_invariant_sum_net, build_invariant_tensor_net,
    build_stab_invariant_net, HeadTemplate, PhiSpec,
};
use super::{MlpSpec, Mode, NetKind, Network};

/// Hidden tensor layer: `order`-fold tensor power of the input coordinates
/// with `channels` trivially acted channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorLayerSpec {
    pub order: usize,
    pub channels: usize,
}

/// Serializable architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetKind,
    pub degree: usize,
    /// Required for tensor and equivariant nets; pooled nets always use `Sₙ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    #[serde(default = "unit_box")]
    pub domain: [f64; 2],
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<MlpSpec>,
    /// Fixed coordinate of a stabilizer net.
    #[serde(default)]
    pub base: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tensor_layers: Vec<TensorLayerSpec>,
    /// Per-orbit head of an equivariant net; defaults to a Ka head built
    /// from `phi` and `rho`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadTemplate>,
    /// Coset representatives per orbit (orbits ordered by smallest point);
    /// the canonical choice is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representatives: Option<Vec<Vec<Permutation>>>,
    /// Layer widths of a dense net.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp: Option<MlpSpec>,
}

fn unit_box() -> [f64; 2] {
    [0.0, 1.0]
}

impl NetworkSpec {
    fn bare(kind: NetKind, degree: usize, mode: Mode) -> Self {
        Self {
            kind,
            degree,
            group: None,
            domain: unit_box(),
            mode,
            phi: None,
            rho: None,
            base: 0,
            tensor_layers: Vec::new(),
            head: None,
            representatives: None,
            mlp: None,
        }
    }

    /// `ρ∘Σ∘φ` with `φ: ℝ → ℝ^{n+1}`. Wide: one hidden layer each of widths
    /// `phi_width`, `rho_width`. Deep: `layers` hidden layers of width `n+2`.
    pub fn invariant_sum(n: usize, mode: Mode, phi_width: usize, rho_width: usize, layers: usize) -> Self {
        let (phi, rho) = pooled_stacks(n, n + 1, mode, phi_width, rho_width, layers, n + 2);
        Self {
            phi: Some(PhiSpec::Mlp(phi)),
            rho: Some(rho),
            ..Self::bare(NetKind::InvariantSum, n, mode)
        }
    }

    pub fn stab_invariant(n: usize, base: usize, mode: Mode, phi_width: usize, rho_width: usize, layers: usize) -> Self {
        let (phi, rho) = pooled_stacks(n, n + 2, mode, phi_width, rho_width, layers, n + 1);
        Self {
            phi: Some(PhiSpec::Mlp(phi)),
            rho: Some(rho),
            base,
            ..Self::bare(NetKind::StabInvariant, n, mode)
        }
    }

    /// Equivariant net over `group` with Ka stabilizer heads.
    pub fn equivariant(
        group: &PermutationGroup,
        mode: Mode,
        phi_width: usize,
        rho_width: usize,
        layers: usize,
    ) -> Self {
        let n = group.degree();
        let (phi, rho) = pooled_stacks(n, n + 2, mode, phi_width, rho_width, layers, n + 1);
        Self {
            group: Some(group.to_spec()),
            head: Some(HeadTemplate::Ka {
                phi: PhiSpec::Mlp(phi),
                rho,
            }),
            ..Self::bare(NetKind::Equivariant, group.degree(), mode)
        }
    }

    pub fn invariant_tensor(group: &PermutationGroup, layers: Vec<TensorLayerSpec>) -> Self {
        Self {
            group: Some(group.to_spec()),
            tensor_layers: layers,
            ..Self::bare(NetKind::InvariantTensor, group.degree(), Mode::Free)
        }
    }

    pub fn dense(mlp: MlpSpec) -> Self {
        Self {
            mlp: Some(mlp.clone()),
            ..Self::bare(NetKind::Dense, mlp.input(), Mode::Free)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Parse("empty network spec".into()));
        }
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    fn group(&self) -> Result<Arc<PermutationGroup>> {
        let g = match &self.group {
            Some(spec) => spec.build()?,
            None => PermutationGroup::symmetric(self.degree)?,
        };
        if g.degree() != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: g.degree(),
            });
        }
        Ok(Arc::new(g))
    }

    fn cosets(&self, group: &PermutationGroup) -> Result<Vec<CosetDecomposition>> {
        match &self.representatives {
            None => group.all_coset_decompositions(),
            Some(reps) => {
                let bases = group.orbit_decomposition().base_points();
                if reps.len() != bases.len() {
                    return Err(Error::SizeMismatch {
                        expected: bases.len(),
                        found: reps.len(),
                    });
                }
                bases
                    .into_iter()
                    .zip(reps)
                    .map(|(b, r)| CosetDecomposition::with_representatives(group, b, r.clone()))
                    .collect()
            }
        }
    }

    pub fn build<T: Real>(&self) -> Result<Network<T>> {
        let missing = |what: &str| Error::Config(format!("{what} is required for {:?} nets", self.kind));
        let mut net = match self.kind {
            NetKind::InvariantSum | NetKind::StabInvariant => {
                if let Some(g) = &self.group {
                    let order = g.build()?.order();
                    if order != PermutationGroup::symmetric(self.degree)?.order() {
                        return Err(Error::Config("pooled nets are defined for the full symmetric group".into()));
                    }
                }
                let phi = self.phi.as_ref().ok_or_else(|| missing("phi"))?;
                let rho = self.rho.as_ref().ok_or_else(|| missing("rho"))?;
                if self.kind == NetKind::InvariantSum {
                    build_invariant_sum_net(self.degree, phi, rho, self.mode)?
                } else {
                    build_stab_invariant_net(self.degree, self.base, phi, rho, self.mode)?
                }
            }
            NetKind::InvariantTensor => {
                let group = self.group()?;
                let mut actions = vec![natural_action(&group)];
                for l in &self.tensor_layers {
                    actions.push(tensor_action(&group, l.order, l.channels)?);
                }
                build_invariant_tensor_net(&actions, self.mode)?
            }
            NetKind::Equivariant => {
                let group = self.group()?;
                let cosets = self.cosets(&group)?;
                let template = match (&self.head, &self.phi, &self.rho) {
                    (Some(h), _, _) => h.clone(),
                    (None, Some(phi), Some(rho)) => HeadTemplate::Ka {
                        phi: phi.clone(),
                        rho: rho.clone(),
                    },
                    _ => return Err(missing("head (or phi and rho)")),
                };
                build_equivariant_net(&group, &cosets, &template, self.mode)?
            }
            NetKind::Dense => {
                let mlp = self.mlp.as_ref().ok_or_else(|| missing("mlp"))?;
                if mlp.input() != self.degree {
                    return Err(Error::DegreeMismatch {
                        expected: self.degree,
                        found: mlp.input(),
                    });
                }
                build_dense_net(mlp)?
            }
        };
        net.set_domain(self.domain[0], self.domain[1])?;
        Ok(net)
    }
}

/// φ and ρ stacks for pooled heads. `rho_in` is ρ's input width; deep mode
/// uses `layers` hidden layers of width `phi_cap` in φ and `n+2` in ρ.
fn pooled_stacks(
    n: usize,
    rho_in: usize,
    mode: Mode,
    phi_width: usize,
    rho_width: usize,
    layers: usize,
    phi_cap: usize,
) -> (MlpSpec, MlpSpec) {
    match mode {
        Mode::Deep => (
            MlpSpec::with_hidden(1, &vec![phi_cap; layers], n + 1),
            MlpSpec::with_hidden(rho_in, &vec![n + 2; layers], 1),
        ),
        _ => (
            MlpSpec::with_hidden(1, &[phi_width], n + 1),
            MlpSpec::with_hidden(rho_in, &[rho_width], 1),
        ),
    }
}

/// Parameters together with a hash of the wiring they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub pattern_hash: String,
    pub param_count: usize,
    pub params: Vec<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "eqnet-checkpoint-1";

impl<T: Real> Network<T> {
    /// SHA-256 over the kind, degree, every block's sharing pattern and the
    /// head wiring.
    pub fn pattern_hash(&self) -> String {
        let mut text = format!("{:?}|{}|", self.kind, self.degree);
        for b in &self.blocks {
            text.push_str(&format!("{}:{}:{};", b.pattern.fingerprint(), b.offset, b.relu));
        }
        text.push_str(&format!("{:?}", self.body));
        sha256_hex(text.as_bytes())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            pattern_hash: self.pattern_hash(),
            param_count: self.params.len(),
            params: self.params.iter().map(|p| p.to_f64_lossy()).collect(),
        }
    }

    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unknown checkpoint format {:?}", ckpt.format)));
        }
        if ckpt.pattern_hash != self.pattern_hash() {
            return Err(Error::Config("checkpoint was written for a different sharing pattern".into()));
        }
        if ckpt.params.len() != ckpt.param_count {
            return Err(Error::SizeMismatch {
                expected: ckpt.param_count,
                found: ckpt.params.len(),
            });
        }
        self.set_params(ckpt.params.iter().map(|&v| T::from_f64_lossy(v)).collect())
    }
}
