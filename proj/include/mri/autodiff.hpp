#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mri/rng.hpp"
#include "mri/types.hpp"
#include "mri/wavelets.hpp"

namespace mri {

/// Dense real tensor, NCHW row-major. Complex images travel through the
/// graph as (real, imag) channel pairs; multi-coil stacks put the coil
/// index on the batch axis so per-coil weight sharing is automatic.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1, 1, 1);
        t.data[0] = v;
        return t;
    }

    size_t numel() const { return static_cast<size_t>(n) * c * h * w; }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const;

    double& at(int in, int ic, int ih, int iw) {
        return data[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    const double& at(int in, int ic, int ih, int iw) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw];
    }

    void fill_randn(Rng& rng, double stddev);
};

// Conversions between domain types and graph tensors. Complex values are
// stored as channel pairs (re, im); coil stacks use the batch axis.
Tensor tensor_from_image(const ComplexImage& img);              // 1 x 2 x H x W
ComplexImage image_from_tensor(const Tensor& t);                // expects 1 x 2
Tensor tensor_from_coils(const CoilKSpace& k);                  // L x 2 x H x W
CoilKSpace coils_from_tensor(const Tensor& t);
Tensor tensor_from_maps(const SensitivitySet& maps);            // L x 2 x H x W
SensitivitySet maps_from_tensor(const Tensor& t);
Tensor tensor_from_real(const RealImage& img);                  // 1 x 1 x H x W

/// A named learnable tensor with a gradient accumulator of the same shape.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string name_, Tensor value_)
        : name(std::move(name_)), value(std::move(value_)),
          grad(value.n, value.c, value.h, value.w) {}
};

/// Name-keyed parameter registry. Iteration order is always name-sorted so
/// that checkpoints and optimizer sweeps are deterministic.
class ParamStore {
public:
    Parameter& create(const std::string& name, Tensor init);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool has(const std::string& name) const { return items_.count(name) != 0; }
    size_t size() const { return items_.size(); }
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    void zero_grads();

private:
    std::map<std::string, std::unique_ptr<Parameter>> items_;
};

/// Coarse signal-domain tag used for architectural assertions (a conv layer
/// must never consume a k-space tensor).
enum class Domain { none, image, kspace };

enum class Padding { same, valid };

using NodeId = int;

/// Dynamic single-use tape: nodes are appended in topological order and the
/// backward pass walks them in exact reverse order, accumulating gradients.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;                       // allocated on first touch in backward
        bool requires_grad = false;
        Domain domain = Domain::none;
        const char* op = "";
        std::vector<NodeId> parents;
        std::function<void()> backward;    // accumulates into parent grads
        Parameter* param = nullptr;        // set for leaf() nodes
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // --- leaves ----------------------------------------------------------
    NodeId constant(Tensor v, Domain d = Domain::none);
    NodeId leaf(Parameter& p, Domain d = Domain::none);

    // --- elementwise -----------------------------------------------------
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId scalar_mul(NodeId a, double s);
    NodeId add_scalar(NodeId a, double s);
    NodeId pow_const(NodeId a, double p);
    NodeId relu(NodeId a);
    NodeId leaky_relu(NodeId a, double slope = 0.01);
    NodeId charbonnier(NodeId a, double eps = 1e-6);

    // --- shape / structure -----------------------------------------------
    NodeId concat(const std::vector<NodeId>& parts);          // channel axis
    NodeId slice(NodeId a, int c0, int c1);                   // channels [c0, c1)
    NodeId avgpool2(NodeId a);
    NodeId nearest_upsample2(NodeId a);
    NodeId dwt_layer(NodeId a, WaveletFamily family = WaveletFamily::haar);
    NodeId idwt_layer(NodeId a, WaveletFamily family = WaveletFamily::haar);

    // --- dense / reductions ----------------------------------------------
    NodeId conv2d(NodeId x, NodeId w, Padding pad = Padding::same);
    NodeId bias_add(NodeId x, NodeId b);                      // b: 1 x C x 1 x 1
    NodeId mean(NodeId a);
    NodeId sum(NodeId a);

    // --- complex / measurement-model primitives --------------------------
    NodeId cmag(NodeId a);                     // (N,2K,H,W) -> (N,K,H,W) moduli
    NodeId fftc(NodeId a);                     // centered unitary FFT per pair
    NodeId ifftc(NodeId a);
    NodeId mask_rows(NodeId a, const SamplingMask& mask);
    NodeId sum_coils(NodeId a);                // sum over batch -> batch 1
    NodeId broadcast_coils(NodeId a, int coils);
    NodeId scalar_param_mul(NodeId x, NodeId s);   // s: scalar node
    NodeId renorm_maps(NodeId maps, const std::vector<uint8_t>& support);

    // --- complex helpers composed from the primitives above ---------------
    NodeId cmul(NodeId a, NodeId b);           // elementwise complex product
    NodeId conj(NodeId a);

    /// Reverse-mode sweep from a scalar loss node. Single use per tape.
    void backward(NodeId loss);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    const Tensor& grad(NodeId id) const;
    size_t size() const { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_[check(id)]; }

private:
    std::vector<Node> nodes_;
    bool ran_backward_ = false;

    size_t check(NodeId id) const;
    NodeId push(Node n);
    Tensor& grad_buf(NodeId id);
    bool wants(NodeId id) const { return nodes_[check(id)].requires_grad; }
    NodeId unary(const char* op, NodeId a, Tensor out, std::function<void()> bw, Domain d);
};

/// Result of a finite-difference comparison against reverse-mode gradients.
struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
    std::string worst;          // "param[index]" of the worst coordinate
    bool pass(double tol) const { return checked > 0 && max_rel_err < tol; }
};

/// Central finite differences over every parameter in `params` (coordinates
/// subsampled deterministically when a tensor is large). `build` must
/// construct a scalar loss node from the current parameter values.
GradCheckReport grad_check(ParamStore& params, const std::function<NodeId(Tape&)>& build,
                           double step = 1e-5, int max_coords_per_param = 50,
                           uint64_t seed = 1);

/// Convenience: build a fresh tape and return the scalar loss value.
double eval_scalar(const std::function<NodeId(Tape&)>& build);

} // namespace mri
