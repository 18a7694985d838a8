#include "mri/optim.hpp"

#include <cmath>

namespace mri {

double radam_rho_inf(double beta2) { return 2.0 / (1.0 - beta2) - 1.0; }

double radam_rho_t(double beta2, int t) {
    const double b2t = std::pow(beta2, t);
    return radam_rho_inf(beta2) - 2.0 * t * b2t / (1.0 - b2t);
}

bool radam_rectified(double beta2, int t) { return radam_rho_t(beta2, t) > 4.0; }

double radam_rect_factor(double beta2, int t) {
    const double ri = radam_rho_inf(beta2);
    const double rt = radam_rho_t(beta2, t);
    return std::sqrt(((rt - 4.0) * (rt - 2.0) * ri) / ((ri - 4.0) * (ri - 2.0) * rt));
}

Radam::Radam(ParamStore& params, RadamConfig cfg) : params_(params), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw InvalidConfigError("radam: lr must be positive");
    if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 <= 0.0 || cfg_.beta2 >= 1.0)
        throw InvalidConfigError("radam: betas must lie in [0, 1)");
    for (Parameter* p : params_.all()) {
        m_.emplace(p->name, Tensor(p->value.n, p->value.c, p->value.h, p->value.w));
        v_.emplace(p->name, Tensor(p->value.n, p->value.c, p->value.h, p->value.w));
    }
}

RadamStepInfo Radam::step() {
    RadamStepInfo info;
    for (Parameter* p : params_.all())
        for (double g : p->grad.data)
            if (!std::isfinite(g)) {
                info.t = t_;
                info.rejected = true;
                return info;
            }

    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (Parameter* p : params_.all())
            for (double g : p->grad.data) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) {
            const double scale = cfg_.clip_norm / norm;
            for (Parameter* p : params_.all())
                for (double& g : p->grad.data) g *= scale;
        }
    }

    ++t_;
    const double b1t = std::pow(cfg_.beta1, t_);
    const double b2t = std::pow(cfg_.beta2, t_);
    const double rho = radam_rho_t(cfg_.beta2, t_);
    const bool rect = rho > 4.0;
    const double r = rect ? radam_rect_factor(cfg_.beta2, t_) : 0.0;

    for (Parameter* p : params_.all()) {
        Tensor& m = m_.at(p->name);
        Tensor& v = v_.at(p->name);
        for (size_t i = 0; i < p->value.numel(); ++i) {
            const double g = p->grad.data[i];
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g;
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m.data[i] / (1.0 - b1t);
            if (rect) {
                const double vhat = std::sqrt(v.data[i] / (1.0 - b2t));
                p->value.data[i] -= cfg_.lr * r * mhat / (vhat + cfg_.eps);
            } else {
                p->value.data[i] -= cfg_.lr * mhat;
            }
        }
    }
    info.t = t_;
    info.rectified = rect;
    info.rho_t = rho;
    return info;
}

const Tensor& Radam::first_moment(const std::string& name) const {
    auto it = m_.find(name);
    if (it == m_.end()) throw InvalidConfigError("radam: unknown parameter " + name);
    return it->second;
}

const Tensor& Radam::second_moment(const std::string& name) const {
    auto it = v_.find(name);
    if (it == v_.end()) throw InvalidConfigError("radam: unknown parameter " + name);
    return it->second;
}

void Radam::restore_moments(const std::string& name, Tensor m, Tensor v) {
    auto im = m_.find(name);
    auto iv = v_.find(name);
    if (im == m_.end() || iv == v_.end())
        throw InvalidConfigError("radam: unknown parameter " + name);
    if (!im->second.same_shape(m) || !iv->second.same_shape(v))
        throw InvalidInputError("radam: moment shape mismatch for " + name);
    im->second = std::move(m);
    iv->second = std::move(v);
}

void Radam::restore_step(int t) {
    if (t < 0) throw InvalidInputError("radam: step counter must be >= 0");
    t_ = t;
}

} // namespace mri
