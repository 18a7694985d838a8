#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mri/types.hpp"
#include "mri/wavelets.hpp"

namespace mri {

/// Chambolle-Pock configuration for the wavelet-L1 regularized problem
///   min_x sum_l 1/2 ||y_l - (Ex)_l||^2 + lambda ||psi x||_1
/// tau/sigma <= 0 means "derive from the operator norm" (0.9 / ||K||).
struct PdhgConfig {
    double lambda = 1e-2;
    int n_iter = 200;
    double tau = 0.0;
    double sigma = 0.0;
    double theta = 1.0;
    WaveletFamily family = WaveletFamily::db2;
    int levels = 3;
};

struct PdhgTracePoint {
    int iteration = 0;
    double objective = 0.0;
    double data_term = 0.0;
    double l1_term = 0.0;
};

struct PdhgResult {
    ComplexImage x;
    std::vector<PdhgTracePoint> trace;
};

/// Power-iteration estimate of ||E||, deterministic start vector.
/// The per-step Rayleigh estimate is monotone non-decreasing.
double estimate_opnorm(const ForwardOperator& op, int iters);

/// Composite objective value sum_l 1/2 ||y_l - (Ex)_l||^2 + lambda ||psi x||_1.
double objective(const ComplexImage& x, const CoilKSpace& y, const ForwardOperator& op,
                 double lambda, WaveletFamily family, int levels);

/// Chambolle-Pock with dual variables for the quadratic data term and the
/// L1 term. Refuses to run when tau * sigma * ||K||^2 > 1. `x0` overrides
/// the default warm start E^H y.
PdhgResult solve_cs(const CoilKSpace& y, const ForwardOperator& op, const PdhgConfig& cfg,
                    const ComplexImage* x0 = nullptr);

/// RSS of the per-coil inverse transform of the masked k-space.
RealImage zero_filled(const CoilKSpace& y, const ForwardOperator& op);

/// Write a solver trace as CSV (iteration, objective, data_fidelity, l1_term).
void write_trace_csv(const std::string& path, const std::vector<PdhgTracePoint>& trace);

} // namespace mri
