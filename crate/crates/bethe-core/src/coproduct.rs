//! Composite chains: tensor products of monodromy matrices and the
//! two-site decomposition of Bethe vectors.
