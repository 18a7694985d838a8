#pragma once

#include <map>
#include <string>

#include "mri/autodiff.hpp"

namespace mri {

struct RadamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.0; // <= 0 disables the global-norm gradient guard
};

/// Variance-rectification schedule: rho_inf = 2/(1-beta2) - 1 and
/// rho_t = rho_inf - 2 t beta2^t / (1 - beta2^t). The adaptive (rectified)
/// branch applies exactly when rho_t > 4.
double radam_rho_inf(double beta2);
double radam_rho_t(double beta2, int t);
bool radam_rectified(double beta2, int t);
double radam_rect_factor(double beta2, int t);

struct RadamStepInfo {
    int t = 0;
    bool rectified = false;
    double rho_t = 0.0;
    bool rejected = false; // non-finite gradients: no state was mutated
};

/// Rectified Adam over a ParamStore. Consumes the gradients accumulated in
/// each Parameter; the caller zeroes them between steps.
class Radam {
public:
    explicit Radam(ParamStore& params, RadamConfig cfg = {});

    RadamStepInfo step();
    int steps_taken() const { return t_; }
    const RadamConfig& config() const { return cfg_; }

    // Moment access for checkpointing, keyed by parameter name.
    const Tensor& first_moment(const std::string& name) const;
    const Tensor& second_moment(const std::string& name) const;
    void restore_moments(const std::string& name, Tensor m, Tensor v);
    void restore_step(int t);

private:
    ParamStore& params_;
    RadamConfig cfg_;
    int t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

} // namespace mri
