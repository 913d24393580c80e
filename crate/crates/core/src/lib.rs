//! Permutation-group equivariant networks with exact weight tying.
//!
//! Groups are finite permutation groups given by generators
//! ([`perm_group`]); they act on index sets through explicit tables
//! ([`actions`]). Equivariant affine maps between two acted-on index sets are
//! parameterized by the orbits of index pairs ([`equi_linear`]). The
//! [`nets`] module assembles invariant and equivariant architectures and
//! [`trainer`] fits them by gradient descent.
//!
//! Linear-algebra routines are generic over [`Field`] (floating point or
//! exact rationals); networks are generic over [`Real`].

pub mod actions;
pub mod equi_linear;
pub mod error;
pub mod fingerprint;
pub mod linalg;
pub mod nets;
pub mod perm_group;
pub mod scalar;
pub mod targets;
pub mod trainer;

pub use actions::{
    extend_with_trivial_channels, induced_star_action, induced_star_action_with, natural_action,
    sigma_tilde, tensor_action, tuple_action, union_of_permutations, GroupAction, IndexScheme,
};
pub use equi_linear::{
    brute_force_equivariant_basis, constraint_nullspace_dimension, count_free_params,
    equivariance_defect, pair_orbits, parameter_bound, ParamCount, ParameterBound, PatternExport,
    SharingPattern, TiedLinearLayer,
};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use nets::{
    build_dense_net, build_equivariant_net, build_invariant_sum_net, build_invariant_tensor_net,
    build_stab_invariant_net, first_layer_g, ka_encoder, report_bounds, BoundsReport, Checkpoint,
    HeadTemplate, MlpSpec, Mode, NetKind, Network, NetworkSpec, PhiSpec,
};
pub use perm_group::{CosetDecomposition, GroupSpec, OrbitDecomposition, Permutation, PermutationGroup};
pub use scalar::{Field, Real};
pub use targets::Target;
pub use trainer::{
    backprop, grid_sup_error, initialize, train, Dataset, GridSpec, OptimizerKind, Sampling, TrainConfig,
    TrainReport, TrainStatus,
};

/// Exact rational scalar used by the oracles.
pub type Exact = num_rational::BigRational;

pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type TiedLinearLayer64 = TiedLinearLayer<f64>;
pub type TiedLinearLayerExact = TiedLinearLayer<Exact>;
pub type Matrix64 = Matrix<f64>;
pub type MatrixExact = Matrix<Exact>;
