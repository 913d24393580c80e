//! The `verify` suite: structural and numerical checks on one group.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use eqnet_core::nets::{HeadTemplate, MlpSpec};
use eqnet_core::{
    brute_force_equivariant_basis, build_equivariant_net, first_layer_g, induced_star_action,
    natural_action, pair_orbits, tensor_action, Exact, GroupAction, Matrix64, Mode, Network64, Permutation, PermutationGroup,
};

use crate::failure::Outcome;

const TOL: f64 = 1e-9;
const ORACLE_POINTS: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub sigma: Vec<usize>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn new(name: &'static str, residual: f64, witness: Option<Witness>) -> Self {
        Self {
            name,
            status: if residual <= TOL { "pass" } else { "fail" },
            max_residual: residual,
            tolerance: TOL,
            witness,
            note: None,
        }
    }

    fn skipped(name: &'static str, why: String) -> Self {
        Self {
            name,
            status: "skipped",
            max_residual: 0.0,
            tolerance: TOL,
            witness: None,
            note: Some(why),
        }
    }

    pub fn failed(&self) -> bool {
        self.status == "fail"
    }
}

pub struct Options {
    pub seed: u64,
    pub inputs: usize,
    pub corrupt_tying: bool,
}

fn point(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest `|F(σ·x) − act(σ)·F(x)|` over elements and sampled inputs, with
/// the worst pair as witness.
fn sweep(
    group: &PermutationGroup,
    inputs: &[Vec<f64>],
    f: impl Fn(&[f64]) -> Vec<f64>,
    act: impl Fn(&Permutation, &[f64]) -> Vec<f64>,
) -> (f64, Option<Witness>) {
    let mut worst = 0.0;
    let mut witness = None;
    for x in inputs {
        let fx = f(x);
        for s in group.elements() {
            let d = gap(&f(&s.act_on_slice(x).expect("input has group degree")), &act(s, &fx));
            if d > worst {
                worst = d;
                witness = Some(Witness {
                    sigma: s.images().to_vec(),
                    x: x.clone(),
                });
            }
        }
    }
    (worst, witness.filter(|_| worst > TOL))
}

fn natural(s: &Permutation, y: &[f64]) -> Vec<f64> {
    s.act_on_slice(y).expect("output has group degree")
}

fn axioms(group: &PermutationGroup) -> Check {
    let mut bad = group.check_axioms().err();
    for i in 0..group.degree() {
        let (orbit, stab) = (group.orbit(i), group.stabilizer(i));
        match (orbit, stab) {
            (Ok(o), Ok(s)) if o.len() * s.order() == group.order() => {}
            _ => bad = bad.or(Some(format!("orbit-stabilizer fails at {i}"))),
        }
    }
    let mut c = Check::new("group_axioms", if bad.is_some() { 1.0 } else { 0.0 }, None);
    c.note = bad;
    c
}

fn star_law(group: &Arc<PermutationGroup>) -> Check {
    match induced_star_action(group) {
        Ok(star) => match star.check_homomorphism() {
            Ok(()) => Check::new("star_action_law", 0.0, None),
            Err(v) => {
                let mut c = Check::new("star_action_law", 1.0, None);
                c.note = Some(format!("{v:?}"));
                c
            }
        },
        Err(e) => Check::skipped("star_action_law", e.to_string()),
    }
}

/// Subgroup generated by the stabilizers of every orbit base; a linear map
/// commuting with it commutes with each stabilizer.
fn joint_stabilizer(group: &PermutationGroup) -> eqnet_core::Result<Arc<PermutationGroup>> {
    let mut gens = Vec::new();
    for c in group.all_coset_decompositions()? {
        gens.extend(c.stabilizer().generators().iter().cloned());
    }
    Ok(Arc::new(PermutationGroup::generate(group.degree(), gens)?))
}

fn first_layer(group: &Arc<PermutationGroup>, inputs: &[Vec<f64>], r: &mut ChaCha8Rng) -> eqnet_core::Result<Check> {
    let cosets = group.all_coset_decompositions()?;
    let star = induced_star_action(group)?;
    let nat = natural_action(group).restrict(&joint_stabilizer(group)?)?;
    let pattern = pair_orbits(&nat, &nat)?;
    let mut worst = (0.0, None);
    for _ in 0..5 {
        let params: Vec<f64> = (0..pattern.free_param_count()).map(|_| r.random_range(-1.0..1.0)).collect();
        let l: Matrix64 = pattern.realize(&params)?.0;
        let g = first_layer_g(group, &cosets, l, 1e-12)?;
        let res = sweep(
            group,
            inputs,
            |x| g.apply(x).expect("input has group degree"),
            |s, y| star.apply(s, y).expect("block layout matches"),
        );
        if res.0 >= worst.0 {
            worst = res;
        }
    }
    Ok(Check::new("first_layer_star_equivariance", worst.0, worst.1))
}

fn equivariant_net(group: &Arc<PermutationGroup>, inputs: &[Vec<f64>], r: &mut ChaCha8Rng) -> eqnet_core::Result<Check> {
    let n = group.degree();
    let cosets = group.all_coset_decompositions()?;
    let template = HeadTemplate::Symmetrized {
        mlp: MlpSpec::with_hidden(n, &[8], 1),
    };
    let mut net: Network64 = build_equivariant_net(group, &cosets, &template, Mode::Free)?;
    net.params_mut().iter_mut().for_each(|p| *p = r.random_range(-1.0..1.0));
    let (worst, witness) = sweep(group, inputs, |x| net.forward(x).expect("input has net degree"), natural);
    Ok(Check::new("equivariant_net_residual", worst, witness))
}

fn pattern_dimension(group: &Arc<PermutationGroup>) -> eqnet_core::Result<Check> {
    let nat = natural_action(group);
    let mut pairs: Vec<(GroupAction, GroupAction)> = vec![(nat.clone(), nat.clone())];
    if let Ok(square) = tensor_action(group, 2, 1) {
        if square.points() <= ORACLE_POINTS {
            pairs.push((square, nat));
        }
    }
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (a, b) in &pairs {
        let tied = pair_orbits(a, b)?.weight_orbits();
        let oracle = brute_force_equivariant_basis::<Exact>(a, b)?.len();
        worst = worst.max(tied.abs_diff(oracle) as f64);
        notes.push(format!("{}→{}: {tied} orbits, oracle {oracle}", a.points(), b.points()));
    }
    let mut c = Check::new("pattern_dimension", worst, None);
    c.note = Some(notes.join("; "));
    Ok(c)
}

fn tied_layer(
    group: &Arc<PermutationGroup>,
    inputs: &[Vec<f64>],
    r: &mut ChaCha8Rng,
    corrupt: bool,
) -> eqnet_core::Result<Check> {
    let n = group.degree();
    let nat = natural_action(group);
    let pattern = pair_orbits(&nat, &nat)?;
    let params: Vec<f64> = (0..pattern.free_param_count()).map(|_| r.random_range(-1.0..1.0)).collect();
    let (mut w, b) = pattern.realize(&params)?;
    if corrupt && n > 1 {
        // break the tie of a single off-diagonal entry
        w.as_mut_slice()[1] += 0.5;
    }
    let (worst, witness) = sweep(
        group,
        inputs,
        |x| w.mul_vec(x).into_iter().zip(&b).map(|(v, c)| v + c).collect(),
        natural,
    );
    Ok(Check::new("tied_layer_equivariance", worst, witness))
}

pub fn run(group: &Arc<PermutationGroup>, opts: &Options) -> Outcome<Vec<Check>> {
    let n = group.degree();
    let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
    let inputs: Vec<Vec<f64>> = (0..opts.inputs).map(|_| point(&mut r, n)).collect();
    let mut checks = vec![axioms(group), star_law(group)];
    checks.push(first_layer(group, &inputs, &mut r).unwrap_or_else(|e| Check::skipped("first_layer_star_equivariance", e.to_string())));
    checks.push(equivariant_net(group, &inputs, &mut r)?);
    checks.push(if n <= ORACLE_POINTS {
        pattern_dimension(group)?
    } else {
        Check::skipped("pattern_dimension", format!("degree {n} exceeds the oracle size"))
    });
    checks.push(tied_layer(group, &inputs, &mut r, opts.corrupt_tying)?);
    Ok(checks)
}
