use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::actions::{extend_with_trivial_channels, natural_action, tensor_action};
use crate::equi_linear::pair_orbits;

fn randomize<T: Real>(net: &mut Network<T>, seed: u64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    for p in net.params_mut() {
        *p = T::from_f64_lossy(r.random_range(-1.0..1.0));
    }
}

fn inputs(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| r.random_range(0.0..1.0)).collect()).collect()
}

fn sym(n: usize) -> Arc<PermutationGroup> {
    Arc::new(PermutationGroup::symmetric(n).unwrap())
}

fn wide_phi(n: usize, h: usize) -> PhiSpec {
    PhiSpec::Mlp(MlpSpec::with_hidden(1, &[h], n + 1))
}

/// Dense stack read straight from the flat parameter vector: for each layer,
/// weights row-major then biases.
fn naive_stack(params: &[f64], offset: &mut usize, widths: &[usize], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (k, w) in widths.windows(2).enumerate() {
        let (m, n) = (w[0], w[1]);
        let weights = &params[*offset..*offset + m * n];
        let bias = &params[*offset + m * n..*offset + m * n + n];
        *offset += m * n + n;
        let last = k + 2 == widths.len();
        a = (0..n)
            .map(|i| {
                let s: f64 = bias[i] + (0..m).map(|j| weights[i * m + j] * a[j]).sum::<f64>();
                if last { s } else { s.max(0.0) }
            })
            .collect();
    }
    a
}

fn naive_pooled(params: &[f64], phi: &[usize], rho: &[usize], base: Option<usize>, x: &[f64]) -> f64 {
    let mut pooled = vec![0.0; *phi.last().unwrap()];
    for (i, &xi) in x.iter().enumerate() {
        if Some(i) == base {
            continue;
        }
        let mut off = 0;
        for (p, v) in pooled.iter_mut().zip(naive_stack(params, &mut off, phi, &[xi])) {
            *p += v;
        }
    }
    let mut off = phi.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let input: Vec<f64> = base.map(|b| x[b]).into_iter().chain(pooled).collect();
    naive_stack(params, &mut off, rho, &input)[0]
}

#[test]
fn invariant_sum_net_is_invariant() {
    for n in [3, 4] {
        let rho = MlpSpec::with_hidden(n + 1, &[7], 1);
        let mut net: Network<f64> = build_invariant_sum_net(n, &wide_phi(n, 5), &rho, Mode::Wide).unwrap();
        randomize(&mut net, n as u64);
        let elems = net.group().elements().to_vec();
        assert_eq!(elems.len(), if n == 3 { 6 } else { 24 });
        assert!(net.equivariance_residual(&elems, &inputs(n, 100, 1)).unwrap() <= 1e-9);
    }
}

#[test]
fn constant_rho_gives_constant_net() {
    let rho = MlpSpec::with_hidden(4, &[3], 1);
    let mut net: Network<f64> = build_invariant_sum_net(3, &wide_phi(3, 4), &rho, Mode::Free).unwrap();
    randomize(&mut net, 3);
    let last = net.blocks().last().unwrap().clone();
    let range = last.param_range();
    let weights = last.pattern.weight_orbits();
    for k in 0..weights {
        net.params_mut()[range.start + k] = 0.0;
    }
    let c = net.forward(&[0.0, 0.0, 0.0]).unwrap()[0];
    for x in inputs(3, 20, 4) {
        assert_eq!(net.forward(&x).unwrap()[0], c);
    }
}

#[test]
fn exact_encoder_reproduces_power_sums() {
    let n = 3;
    let rho = MlpSpec::new(vec![n + 1, 1]);
    let mut net: Network<f64> =
        build_invariant_sum_net(n, &PhiSpec::Exact { degree: n }, &rho, Mode::Free).unwrap();
    assert_eq!(net.params().len(), n + 2);
    // ρ picks out Σxᵢ² + Σxᵢ³
    net.set_params(vec![0.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
    for x in inputs(n, 10, 2) {
        let expect: f64 = x.iter().map(|v| v * v + v * v * v).sum();
        assert!((net.forward(&x).unwrap()[0] - expect).abs() < 1e-14);
    }
}

#[test]
fn tensor_net_without_layers_sums() {
    let g = sym(3);
    let net: Network<f64> = build_invariant_tensor_net(&[natural_action(&g)], Mode::Free).unwrap();
    assert!(net.params().is_empty());
    assert_eq!(net.forward(&[0.25, 0.5, 2.0]).unwrap(), vec![2.75]);
}

#[test]
fn tensor_nets_are_invariant() {
    let groups = [sym(3), sym(4), Arc::new(PermutationGroup::cyclic(4).unwrap())];
    for g in groups {
        let nat = natural_action(&g);
        let actions = vec![
            nat.clone(),
            tensor_action(&g, 2, 2).unwrap(),
            extend_with_trivial_channels(&nat, 3).unwrap(),
        ];
        let mut net: Network<f64> = build_invariant_tensor_net(&actions, Mode::Free).unwrap();
        for (b, pair) in net.blocks().iter().zip(actions.windows(2)) {
            assert_eq!(*b.pattern, pair_orbits(&pair[0], &pair[1]).unwrap());
        }
        randomize(&mut net, 11);
        let elems = g.elements().to_vec();
        assert!(net.equivariance_residual(&elems, &inputs(g.degree(), 100, 5)).unwrap() <= 1e-9);
    }
}

#[test]
fn tensor_net_rejects_non_natural_input() {
    let g = sym(3);
    assert!(build_invariant_tensor_net::<f64>(&[tensor_action(&g, 2, 1).unwrap()], Mode::Free).is_err());
    assert!(build_invariant_tensor_net::<f64>(&[], Mode::Free).is_err());
}

#[test]
fn stab_net_invariance_and_witness() {
    let n = 4;
    let rho = MlpSpec::with_hidden(n + 2, &[6], 1);
    let mut net: Network<f64> = build_stab_invariant_net(n, 0, &wide_phi(n, 5), &rho, Mode::Wide).unwrap();
    randomize(&mut net, 21);
    assert_eq!(net.group().order(), 6);
    let elems = net.group().elements().to_vec();
    assert!(net.equivariance_residual(&elems, &inputs(n, 100, 3)).unwrap() <= 1e-9);
    let swap = Permutation::transposition(n, 0, 1).unwrap();
    let witness = inputs(n, 100, 8).into_iter().find(|x| {
        let a = net.forward(x).unwrap()[0];
        let b = net.forward(&swap.act_on_slice(x).unwrap()).unwrap()[0];
        (a - b).abs() > 1e-6
    });
    assert!(witness.is_some());
}

#[test]
fn stab_net_degree_two() {
    let rho = MlpSpec::with_hidden(4, &[3], 1);
    let mut net: Network<f64> = build_stab_invariant_net(2, 1, &wide_phi(2, 3), &rho, Mode::Free).unwrap();
    randomize(&mut net, 2);
    assert_eq!(net.group().order(), 1);
    let x = [0.3, 0.8];
    let params = net.params().to_vec();
    let expect = naive_pooled(&params, &[1, 3, 3], &[4, 3, 1], Some(1), &x);
    assert!((net.forward(&x).unwrap()[0] - expect).abs() < 1e-14);
}

#[test]
fn equivariant_nets_are_equivariant() {
    let n = 3;
    let ka = HeadTemplate::Ka {
        phi: wide_phi(n, 4),
        rho: MlpSpec::with_hidden(n + 2, &[5], 1),
    };
    let sym_head = HeadTemplate::Symmetrized {
        mlp: MlpSpec::with_hidden(4, &[6, 6], 1),
    };
    let c4 = Arc::new(PermutationGroup::cyclic(4).unwrap());
    let d4 = Arc::new(PermutationGroup::dihedral(4).unwrap());
    let cases: Vec<(Arc<PermutationGroup>, HeadTemplate)> = vec![
        (sym(3), ka.clone()),
        (c4.clone(), sym_head.clone()),
        (d4, sym_head),
        (
            c4,
            HeadTemplate::Ka {
                phi: wide_phi(4, 3),
                rho: MlpSpec::with_hidden(6, &[4], 1),
            },
        ),
    ];
    for (g, head) in cases {
        let cosets = g.all_coset_decompositions().unwrap();
        let mut net: Network<f64> = build_equivariant_net(&g, &cosets, &head, Mode::Free).unwrap();
        randomize(&mut net, 9);
        let elems = g.elements().to_vec();
        let r = net.equivariance_residual(&elems, &inputs(g.degree(), 100, 6)).unwrap();
        assert!(r <= 1e-9, "{g:?}: {r}");
    }
}

#[test]
fn trivial_group_gives_independent_heads() {
    let g = Arc::new(PermutationGroup::trivial(3));
    let cosets = g.all_coset_decompositions().unwrap();
    let head = HeadTemplate::Symmetrized {
        mlp: MlpSpec::with_hidden(3, &[4], 1),
    };
    let mut net: Network<f64> = build_equivariant_net(&g, &cosets, &head, Mode::Free).unwrap();
    let per_head = 3 * 4 + 4 + 4 + 1;
    assert_eq!(net.params().len(), 3 * per_head);
    randomize(&mut net, 4);
    let x = [0.1, 0.7, 0.4];
    let y = net.forward(&x).unwrap();
    let params = net.params().to_vec();
    for (p, yp) in y.iter().enumerate() {
        let mut off = p * per_head;
        assert!((naive_stack(&params, &mut off, &[3, 4, 1], &x)[0] - yp).abs() < 1e-14);
    }
}

#[test]
fn orbit_copies_share_parameters() {
    let n = 4;
    let g = sym(n);
    let cosets = g.all_coset_decompositions().unwrap();
    let head = HeadTemplate::Ka {
        phi: wide_phi(n, 3),
        rho: MlpSpec::with_hidden(n + 2, &[3], 1),
    };
    let mut net: Network<f64> = build_equivariant_net(&g, &cosets, &head, Mode::Free).unwrap();
    let single = (3 + 3) + (3 * (n + 1) + n + 1) + ((n + 2) * 3 + 3) + (3 + 1);
    assert_eq!(net.checkpoint().params.len(), single);
    randomize(&mut net, 12);
    let x = [0.5; 4];
    let before = net.forward(&x).unwrap();
    assert!(before.iter().all(|v| *v == before[0]));
    net.params_mut()[2] += 0.75;
    let after = net.forward(&x).unwrap();
    assert!(after.iter().all(|v| *v == after[0]));
}

#[test]
fn forward_matches_naive_evaluator() {
    let n = 3;
    let phi = [1, 5, 4];
    let rho_sum = [4, 6, 1];
    let rho_stab = [5, 6, 1];
    let mut sum: Network<f64> = build_invariant_sum_net(
        n,
        &PhiSpec::Mlp(MlpSpec::new(phi.to_vec())),
        &MlpSpec::new(rho_sum.to_vec()),
        Mode::Free,
    )
    .unwrap();
    let g = sym(n);
    let cosets = g.all_coset_decompositions().unwrap();
    let head = HeadTemplate::Ka {
        phi: PhiSpec::Mlp(MlpSpec::new(phi.to_vec())),
        rho: MlpSpec::new(rho_stab.to_vec()),
    };
    let mut eq: Network<f64> = build_equivariant_net(&g, &cosets, &head, Mode::Free).unwrap();
    let mut dense: Network<f64> = build_dense_net(&MlpSpec::with_hidden(3, &[7, 5], 2)).unwrap();
    for seed in 0..5 {
        randomize(&mut sum, seed);
        randomize(&mut eq, seed + 100);
        randomize(&mut dense, seed + 200);
        let (ps, pe, pd) = (sum.params().to_vec(), eq.params().to_vec(), dense.params().to_vec());
        for x in inputs(n, 200, seed) {
            let a = sum.forward(&x).unwrap()[0];
            let b = naive_pooled(&ps, &phi, &rho_sum, None, &x);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            let y = eq.forward(&x).unwrap();
            for (p, yp) in y.iter().enumerate() {
                let tau = cosets[0].representative_for(p).unwrap();
                let b = naive_pooled(&pe, &phi, &rho_stab, Some(0), &tau.act_on_slice(&x).unwrap());
                assert!((yp - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
            let mut off = 0;
            let b = naive_stack(&pd, &mut off, &[3, 7, 5, 2], &x);
            let a = dense.forward(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }
}

#[test]
fn single_layer_hand_value() {
    // Σ ∘ (λI + γ(11ᵀ − I) + b) on the ones vector: n(λ + (n−1)γ + b)
    let g = sym(4);
    let nat = natural_action(&g);
    let mut net: Network<f64> = build_invariant_tensor_net(&[nat.clone(), nat], Mode::Free).unwrap();
    net.set_params(vec![2.0, 0.5, 0.1]).unwrap();
    assert!((net.forward(&[1.0; 4]).unwrap()[0] - 4.0 * (2.0 + 3.0 * 0.5 + 0.1)).abs() < 1e-14);
}

#[test]
fn shape_errors() {
    let rho = MlpSpec::with_hidden(3, &[4], 1);
    assert!(build_invariant_sum_net::<f64>(3, &wide_phi(3, 4), &rho, Mode::Free).is_err());
    let phi2 = PhiSpec::Mlp(MlpSpec::with_hidden(2, &[4], 4));
    assert!(build_invariant_sum_net::<f64>(3, &phi2, &MlpSpec::with_hidden(4, &[4], 1), Mode::Free).is_err());
    assert!(build_stab_invariant_net::<f64>(3, 3, &wide_phi(3, 4), &rho, Mode::Free).is_err());
    let mut bad = MlpSpec::with_hidden(4, &[4], 1);
    bad.activations = Some(vec![Activation::Relu, Activation::Relu]);
    assert!(build_dense_net::<f64>(&bad).is_err());
    let net: Network<f64> = build_dense_net(&MlpSpec::with_hidden(2, &[3], 1)).unwrap();
    assert!(net.forward(&[1.0]).is_err());
}

#[test]
fn bounds_reports() {
    let n = 4;
    let deep = NetworkSpec::invariant_sum(n, Mode::Deep, 0, 0, 3).build::<f64>().unwrap();
    let r = report_bounds(&deep);
    assert_eq!(r.width_bound, Some(24));
    assert!(r.width <= 24 && r.pass);
    assert_eq!(r.depth, 3 + 4);

    let wide = NetworkSpec::invariant_sum(n, Mode::Wide, 32, 64, 1).build::<f64>().unwrap();
    let r = report_bounds(&wide);
    assert_eq!((r.depth, r.depth_bound), (3, Some(3)));
    assert_eq!(r.widths, vec![4, 128, 64, 1]);

    let eq = NetworkSpec::equivariant(&PermutationGroup::symmetric(n).unwrap(), Mode::Deep, 0, 0, 2)
        .build::<f64>()
        .unwrap();
    let r = report_bounds(&eq);
    assert_eq!(r.width_bound, Some(64));
    assert!(r.width <= 64 && r.pass);

    let dense = build_dense_net::<f64>(&MlpSpec::new(vec![2, 1])).unwrap();
    let r = report_bounds(&dense);
    assert!(r.pass && r.width_bound.is_none() && r.depth_bound.is_none());
}

#[test]
fn modes_are_enforced_at_build() {
    let n = 3;
    let too_wide = PhiSpec::Mlp(MlpSpec::with_hidden(1, &[n + 3], n + 1));
    let rho = MlpSpec::with_hidden(n + 1, &[n + 2], 1);
    assert!(build_invariant_sum_net::<f64>(n, &too_wide, &rho, Mode::Deep).is_err());
    assert!(build_invariant_sum_net::<f64>(n, &too_wide, &rho, Mode::Free).is_ok());
    let deep_phi = PhiSpec::Mlp(MlpSpec::with_hidden(1, &[4, 4], n + 1));
    assert!(build_invariant_sum_net::<f64>(n, &deep_phi, &rho, Mode::Wide).is_err());
    let stab_phi = PhiSpec::Mlp(MlpSpec::with_hidden(1, &[n + 2], n + 1));
    let stab_rho = MlpSpec::with_hidden(n + 2, &[n + 2], 1);
    assert!(build_stab_invariant_net::<f64>(n, 0, &stab_phi, &stab_rho, Mode::Deep).is_err());
}

#[test]
fn f32_networks_work() {
    let mut net: Network<f32> = NetworkSpec::invariant_sum(3, Mode::Wide, 4, 4, 1).build().unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for p in net.params_mut() {
        *p = r.random_range(-1.0f32..1.0);
    }
    let x = vec![0.2f32, 0.4, 0.9];
    let elems = net.group().elements().to_vec();
    assert!(net.equivariance_residual(&elems, &[x]).unwrap() < 1e-5);
}
