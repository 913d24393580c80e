use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actions::{cosets_by_point, natural_action, GroupAction};
use crate::equi_linear::{pair_orbits, SharingPattern};
use crate::error::{Error, Result};
use crate::perm_group::{CosetDecomposition, PermutationGroup};
use crate::scalar::Real;

use super::bounds::report_bounds;
use super::engine::{AffineBlock, Head, LayerRange, Phi};
use super::{Activation, Body, Lane, MlpSpec, Mode, NetKind, Network, Symmetry};

/// Per-coordinate feature map of a pooled head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PhiSpec {
    /// Fixed moment encoder of the given degree.
    Exact { degree: usize },
    /// Trainable MLP from `ℝ` to the feature space.
    Mlp(MlpSpec),
}

impl PhiSpec {
    pub fn output(&self) -> usize {
        match self {
            PhiSpec::Exact { degree } => degree + 1,
            PhiSpec::Mlp(m) => m.output(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let PhiSpec::Mlp(m) = self {
            m.validate()?;
            if m.input() != 1 {
                return Err(Error::Architecture(format!(
                    "φ must take a scalar input, got width {}",
                    m.input()
                )));
            }
        }
        Ok(())
    }
}

/// Per-orbit head of an equivariant net.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HeadTemplate {
    /// `ρ(x_base, Σ_{i≠base} φ(xᵢ))`; invariant under every permutation
    /// fixing the base point.
    Ka { phi: PhiSpec, rho: MlpSpec },
    /// An MLP on `ℝⁿ` averaged over the stabilizer of the base point.
    Symmetrized { mlp: MlpSpec },
}

#[derive(Default)]
struct Assembler {
    blocks: Vec<AffineBlock>,
    len: usize,
}

impl Assembler {
    fn push(&mut self, pattern: Arc<SharingPattern>, relu: bool) {
        let offset = self.len;
        self.len += pattern.free_param_count();
        self.blocks.push(AffineBlock {
            pattern,
            offset,
            relu,
        });
    }

    fn push_mlp(&mut self, spec: &MlpSpec) -> Result<LayerRange> {
        spec.validate()?;
        let start = self.blocks.len();
        for (w, act) in spec.widths.windows(2).zip(spec.activations()) {
            self.push(Arc::new(SharingPattern::dense(w[0], w[1])), act == Activation::Relu);
        }
        Ok(LayerRange {
            start,
            end: self.blocks.len(),
        })
    }

    fn push_phi(&mut self, spec: &PhiSpec) -> Result<Phi> {
        spec.validate()?;
        Ok(match spec {
            PhiSpec::Exact { degree } => Phi::Exact { degree: *degree },
            PhiSpec::Mlp(m) => Phi::Mlp(self.push_mlp(m)?),
        })
    }

    fn finish<T: Real>(
        self,
        kind: NetKind,
        mode: Mode,
        degree: usize,
        group: Arc<PermutationGroup>,
        symmetry: Symmetry,
        body: Body,
    ) -> Result<Network<T>> {
        let net = Network {
            kind,
            mode,
            degree,
            group,
            symmetry,
            blocks: self.blocks,
            body,
            params: vec![T::zero(); self.len],
            domain: (0.0, 1.0),
        };
        enforce_mode(&net)?;
        Ok(net)
    }
}

/// Rejects nets whose structure breaks the declared mode: wide nets must
/// have depth three, deep nets must keep every lane and the whole net inside
/// the width bounds.
fn enforce_mode<T: Real>(net: &Network<T>) -> Result<()> {
    let r = report_bounds(net);
    match net.mode {
        Mode::Wide if r.depth != 3 => Err(Error::Architecture(format!(
            "wide mode requires depth 3, built depth {}",
            r.depth
        ))),
        Mode::Deep if !r.lanes_within_bound => Err(Error::Architecture(format!(
            "deep mode lane widths {:?} exceed caps φ ≤ {:?}, ρ ≤ {:?}",
            r.lane_widths, r.phi_lane_bound, r.rho_lane_bound
        ))),
        Mode::Deep if r.width_bound.is_some_and(|b| r.width > b) => Err(Error::Architecture(
            format!("width {} exceeds bound {:?}", r.width, r.width_bound),
        )),
        _ => Ok(()),
    }
}

fn check_rho(rho: &MlpSpec, input: usize) -> Result<()> {
    rho.validate()?;
    if rho.input() != input {
        return Err(Error::Architecture(format!(
            "ρ takes {} inputs but the pooled features have {input}",
            rho.input()
        )));
    }
    Ok(())
}

/// `ρ ∘ Σ ∘ (φ, …, φ)` on `ℝⁿ`, invariant under `Sₙ`.
pub fn build_invariant_sum_net<T: Real>(n: usize, phi: &PhiSpec, rho: &MlpSpec, mode: Mode) -> Result<Network<T>> {
    if n == 0 {
        return Err(Error::Architecture("degree must be positive".into()));
    }
    let mut asm = Assembler::default();
    let phi_node = asm.push_phi(phi)?;
    check_rho(rho, phi.output())?;
    let rho_range = asm.push_mlp(rho)?;
    let group = Arc::new(PermutationGroup::symmetric(n)?);
    asm.finish(
        NetKind::InvariantSum,
        mode,
        n,
        group,
        Symmetry::Invariant,
        Body::Single(Head::Sum {
            phi: phi_node,
            rho: rho_range,
        }),
    )
}

/// `ρ(x_base, Σ_{i≠base} φ(xᵢ))`, invariant under the stabilizer of `base`
/// in `Sₙ`.
pub fn build_stab_invariant_net<T: Real>(
    n: usize,
    base: usize,
    phi: &PhiSpec,
    rho: &MlpSpec,
    mode: Mode,
) -> Result<Network<T>> {
    if base >= n {
        return Err(Error::IndexOutOfRange { index: base, bound: n });
    }
    let mut asm = Assembler::default();
    let phi_node = asm.push_phi(phi)?;
    check_rho(rho, 1 + phi.output())?;
    let rho_range = asm.push_mlp(rho)?;
    let group = Arc::new(PermutationGroup::symmetric(n)?.stabilizer(base)?);
    asm.finish(
        NetKind::StabInvariant,
        mode,
        n,
        group,
        Symmetry::Invariant,
        Body::Single(Head::Stab {
            base,
            phi: phi_node,
            rho: rho_range,
        }),
    )
}

/// `Σ ∘ L_H ∘ ReLU ∘ ⋯ ∘ ReLU ∘ L_1` with `L_k` tied between
/// `actions[k-1]` and `actions[k]`. `actions[0]` must be the natural action
/// of the group on the input coordinates.
pub fn build_invariant_tensor_net<T: Real>(actions: &[GroupAction], mode: Mode) -> Result<Network<T>> {
    let first = actions
        .first()
        .ok_or_else(|| Error::Architecture("need at least the input action".into()))?;
    let group = first.group().clone();
    if first.tables() != natural_action(&group).tables() {
        return Err(Error::Architecture("the first action must be the natural action".into()));
    }
    let mut asm = Assembler::default();
    let start = asm.blocks.len();
    for (k, pair) in actions.windows(2).enumerate() {
        if !pair[0].same_group(&pair[1]) {
            return Err(Error::GroupMismatch);
        }
        let relu = k + 2 < actions.len();
        asm.push(Arc::new(pair_orbits(&pair[0], &pair[1])?), relu);
    }
    let layers = LayerRange {
        start,
        end: asm.blocks.len(),
    };
    asm.finish(
        NetKind::InvariantTensor,
        mode,
        group.degree(),
        group,
        Symmetry::Invariant,
        Body::Single(Head::Tensor { layers, channels: 1 }),
    )
}

/// `F(x)_{orbit[k]} = head_j(τ_k · x)` with one head per orbit, shared by all
/// coordinates of that orbit.
pub fn build_equivariant_net<T: Real>(
    group: &Arc<PermutationGroup>,
    cosets: &[CosetDecomposition],
    template: &HeadTemplate,
    mode: Mode,
) -> Result<Network<T>> {
    let n = group.degree();
    cosets_by_point(n, cosets)?;
    for c in cosets {
        if group.orbit(c.base())? != c.orbit() {
            return Err(Error::Config(format!("orbit of {} does not match the group", c.base())));
        }
        if let Some(t) = c.representatives().iter().find(|t| !group.contains(t)) {
            return Err(Error::NotInGroup(t.to_string()));
        }
    }
    let mut asm = Assembler::default();
    let mut lanes = Vec::with_capacity(cosets.len());
    for c in cosets {
        let head = match template {
            HeadTemplate::Ka { phi, rho } => {
                let phi_node = asm.push_phi(phi)?;
                check_rho(rho, 1 + phi.output())?;
                if rho.output() != 1 {
                    return Err(Error::Architecture("per-orbit heads must be scalar".into()));
                }
                Head::Stab {
                    base: c.base(),
                    phi: phi_node,
                    rho: asm.push_mlp(rho)?,
                }
            }
            HeadTemplate::Symmetrized { mlp } => {
                mlp.validate()?;
                if mlp.input() != n || mlp.output() != 1 {
                    return Err(Error::Architecture(format!(
                        "symmetrized head must map ℝ^{n} to ℝ, got {} → {}",
                        mlp.input(),
                        mlp.output()
                    )));
                }
                let inner = Head::Mlp(asm.push_mlp(mlp)?);
                Head::Symmetrized {
                    elements: c.stabilizer().elements().to_vec(),
                    inner: Box::new(inner),
                }
            }
        };
        lanes.push(Lane {
            cosets: c.clone(),
            head,
        });
    }
    asm.finish(
        NetKind::Equivariant,
        mode,
        n,
        group.clone(),
        Symmetry::Equivariant,
        Body::Lanes(lanes),
    )
}

/// Unconstrained MLP, used as the untied baseline.
pub fn build_dense_net<T: Real>(spec: &MlpSpec) -> Result<Network<T>> {
    let mut asm = Assembler::default();
    let range = asm.push_mlp(spec)?;
    let n = spec.input();
    asm.finish(
        NetKind::Dense,
        Mode::Free,
        n,
        Arc::new(PermutationGroup::trivial(n)),
        Symmetry::None,
        Body::Single(Head::Mlp(range)),
    )
}
