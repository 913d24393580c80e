use serde::Serialize;

use crate::equi_linear::{parameter_bound, ParameterBound};
use crate::error::Result;
use crate::scalar::Real;

use super::engine::{AffineBlock, Head, Phi};
use super::{Body, Mode, NetKind, Network};

/// Widths of the φ and ρ stacks inside pooled heads.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LaneWidths {
    /// Hidden and output widths of φ.
    pub phi: Vec<usize>,
    /// All widths of ρ, input included.
    pub rho: Vec<usize>,
}

/// Actual width and depth next to the bound that applies to the net's mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundsReport {
    pub kind: NetKind,
    pub mode: Mode,
    pub degree: usize,
    pub widths: Vec<usize>,
    pub width: usize,
    pub depth: usize,
    pub lane_widths: LaneWidths,
    pub phi_lane_bound: Option<usize>,
    pub rho_lane_bound: Option<usize>,
    pub lanes_within_bound: bool,
    pub width_bound: Option<usize>,
    pub depth_bound: Option<usize>,
    pub pass: bool,
}

fn block_outs(blocks: &[AffineBlock], range: super::LayerRange) -> Vec<usize> {
    range.iter().map(|k| blocks[k].pattern.out_size()).collect()
}

fn phi_layers(phi: &Phi, blocks: &[AffineBlock]) -> Vec<usize> {
    match phi {
        Phi::Exact { degree } => vec![degree + 1],
        Phi::Mlp(r) => {
            let mut outs = block_outs(blocks, *r);
            outs.pop();
            outs
        }
    }
}

fn head_widths(head: &Head, blocks: &[AffineBlock], n: usize) -> Vec<usize> {
    match head {
        Head::Mlp(r) => {
            let mut w = vec![blocks[r.start].pattern.in_size()];
            w.extend(block_outs(blocks, *r));
            w
        }
        Head::Sum { phi, rho } => {
            let mut w = vec![n];
            w.extend(phi_layers(phi, blocks).into_iter().map(|a| n * a));
            w.extend(block_outs(blocks, *rho));
            w
        }
        Head::Stab { phi, rho, .. } => {
            let mut w = vec![n];
            w.extend(phi_layers(phi, blocks).into_iter().map(|a| 1 + (n - 1) * a));
            w.extend(block_outs(blocks, *rho));
            w
        }
        Head::Symmetrized { elements, inner } => {
            let mut w = head_widths(inner, blocks, n);
            let last = w.len() - 1;
            for v in &mut w[1..last] {
                *v *= elements.len();
            }
            w
        }
        Head::Tensor { layers, channels } => {
            let mut w = vec![n];
            let mut outs = block_outs(blocks, *layers);
            outs.pop();
            w.extend(outs);
            w.push(*channels);
            w
        }
    }
}

pub(super) fn layer_widths<T: Real>(net: &Network<T>) -> Vec<usize> {
    let n = net.degree;
    match &net.body {
        Body::Single(h) => head_widths(h, &net.blocks, n),
        Body::Lanes(lanes) => {
            let heads: Vec<(usize, Vec<usize>)> = lanes
                .iter()
                .map(|l| (l.cosets.orbit().len(), head_widths(&l.head, &net.blocks, n)))
                .collect();
            let depth = heads.iter().map(|(_, w)| w.len() - 1).max().unwrap_or(1);
            let mut widths = vec![n];
            for layer in 1..depth {
                let total = heads
                    .iter()
                    .map(|(copies, w)| {
                        // shallower heads carry their scalar output forward
                        let inner = w.len() - 1;
                        copies * if layer < inner { w[layer] } else { 1 }
                    })
                    .sum();
                widths.push(total);
            }
            widths.push(n);
            widths
        }
    }
}

fn lane_widths<T: Real>(net: &Network<T>) -> LaneWidths {
    let mut out = LaneWidths::default();
    let mut visit = |head: &Head| {
        if let Head::Sum { phi, rho } | Head::Stab { phi, rho, .. } = head {
            out.phi.extend(match phi {
                Phi::Exact { degree } => vec![degree + 1],
                Phi::Mlp(r) => block_outs(&net.blocks, *r),
            });
            out.rho.push(net.blocks[rho.start].pattern.in_size());
            out.rho.extend(block_outs(&net.blocks, *rho));
        }
    };
    match &net.body {
        Body::Single(h) => visit(h),
        Body::Lanes(lanes) => lanes.iter().for_each(|l| visit(&l.head)),
    }
    out
}

fn has_pooled_heads<T: Real>(net: &Network<T>) -> bool {
    match &net.body {
        Body::Single(h) => matches!(h, Head::Sum { .. } | Head::Stab { .. }),
        Body::Lanes(lanes) => lanes.iter().all(|l| matches!(l.head, Head::Stab { .. })),
    }
}

/// Width and depth of `net` with the applicable bounds.
///
/// Deep mode caps φ lanes at `n + 2` for `Sₙ`-invariant nets and at
/// `n + 1` for stabilizer heads, ρ lanes at `n + 2`, and the whole net at
/// `n(n+2)` (invariant) or `n³` (equivariant). Wide mode asks for depth 3.
/// Free mode and kinds without pooled heads report vacuous bounds.
pub fn report_bounds<T: Real>(net: &Network<T>) -> BoundsReport {
    let n = net.degree;
    let widths = layer_widths(net);
    let width = widths.iter().copied().max().unwrap_or(0);
    let depth = widths.len().saturating_sub(1);
    let lanes = lane_widths(net);
    let pooled = has_pooled_heads(net);
    let deep = net.mode == Mode::Deep && pooled;
    let (phi_lane_bound, rho_lane_bound) = if deep {
        let phi_cap = match net.kind {
            NetKind::InvariantSum => n + 2,
            _ => n + 1,
        };
        (Some(phi_cap), Some(n + 2))
    } else {
        (None, None)
    };
    let lanes_within_bound = phi_lane_bound.is_none_or(|b| lanes.phi.iter().all(|&w| w <= b))
        && rho_lane_bound.is_none_or(|b| lanes.rho.iter().all(|&w| w <= b));
    let width_bound = match (deep, net.kind) {
        (true, NetKind::InvariantSum) => Some(n * (n + 2)),
        (true, NetKind::Equivariant) => Some(n * n * n),
        _ => None,
    };
    let depth_bound = (net.mode == Mode::Wide).then_some(3);
    let pass = lanes_within_bound
        && width_bound.is_none_or(|b| width <= b)
        && depth_bound.is_none_or(|d| depth == d);
    BoundsReport {
        kind: net.kind,
        mode: net.mode,
        degree: n,
        widths,
        width,
        depth,
        lane_widths: lanes,
        phi_lane_bound,
        rho_lane_bound,
        lanes_within_bound,
        width_bound,
        depth_bound,
        pass,
    }
}

/// Weight count of `net` against `M^{2D}·(2/n²)^d`, where `d` counts the
/// layers in which tying applies: every layer of an equivariant net, the φ
/// layers of pooled invariant nets, the tied layers of tensor nets.
pub fn network_parameter_bound<T: Real>(net: &Network<T>) -> Result<ParameterBound> {
    let widths = layer_widths(net);
    let depth = widths.len() - 1;
    let tied = match (&net.kind, &net.body) {
        (NetKind::Equivariant, _) => depth,
        (NetKind::InvariantTensor, _) => depth,
        (_, Body::Single(Head::Sum { phi, .. } | Head::Stab { phi, .. })) => {
            phi_layers(phi, &net.blocks).len()
        }
        _ => 0,
    };
    parameter_bound(&widths, net.degree, tied, Some(net.param_count().weights))
}
