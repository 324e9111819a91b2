//! Numerical Bethe-equation solving and on-shell verification: residuals,
//! Newton iteration, transfer-matrix eigenvalues, and brute-force spectra.
