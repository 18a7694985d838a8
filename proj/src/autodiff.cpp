#include "mri/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mri/fft.hpp"

namespace mri {

// ---------------------------------------------------------------------------
// Tensor / conversions

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << n << 'x' << c << 'x' << h << 'x' << w;
    return os.str();
}

void Tensor::fill_randn(Rng& rng, double stddev) {
    for (double& v : data) v = stddev * rng.normal();
}

Tensor tensor_from_image(const ComplexImage& img) {
    Tensor t(1, 2, img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            t.at(0, 0, r, c) = img.at(r, c).real();
            t.at(0, 1, r, c) = img.at(r, c).imag();
        }
    return t;
}

ComplexImage image_from_tensor(const Tensor& t) {
    if (t.n != 1 || t.c != 2) throw InvalidInputError("image_from_tensor: expected 1x2xHxW");
    ComplexImage img(t.h, t.w);
    for (int r = 0; r < t.h; ++r)
        for (int c = 0; c < t.w; ++c) img.at(r, c) = cplx(t.at(0, 0, r, c), t.at(0, 1, r, c));
    return img;
}

namespace {
template <typename Stack>
Tensor stack_to_tensor(const Stack& s) {
    Tensor t(s.coils, 2, s.height, s.width);
    for (int l = 0; l < s.coils; ++l)
        for (int r = 0; r < s.height; ++r)
            for (int c = 0; c < s.width; ++c) {
                t.at(l, 0, r, c) = s.at(l, r, c).real();
                t.at(l, 1, r, c) = s.at(l, r, c).imag();
            }
    return t;
}

template <typename Stack>
Stack tensor_to_stack(const Tensor& t, const char* who) {
    if (t.c != 2) throw InvalidInputError(std::string(who) + ": expected Lx2xHxW");
    Stack s(t.n, t.h, t.w);
    for (int l = 0; l < t.n; ++l)
        for (int r = 0; r < t.h; ++r)
            for (int c = 0; c < t.w; ++c) s.at(l, r, c) = cplx(t.at(l, 0, r, c), t.at(l, 1, r, c));
    return s;
}
} // namespace

Tensor tensor_from_coils(const CoilKSpace& k) { return stack_to_tensor(k); }
CoilKSpace coils_from_tensor(const Tensor& t) {
    return tensor_to_stack<CoilKSpace>(t, "coils_from_tensor");
}
Tensor tensor_from_maps(const SensitivitySet& maps) { return stack_to_tensor(maps); }
SensitivitySet maps_from_tensor(const Tensor& t) {
    return tensor_to_stack<SensitivitySet>(t, "maps_from_tensor");
}

Tensor tensor_from_real(const RealImage& img) {
    Tensor t(1, 1, img.height, img.width);
    t.data = img.data;
    return t;
}

// ---------------------------------------------------------------------------
// ParamStore

Parameter& ParamStore::create(const std::string& name, Tensor init) {
    if (items_.count(name)) throw InvalidConfigError("duplicate parameter: " + name);
    auto p = std::make_unique<Parameter>(name, std::move(init));
    Parameter& ref = *p;
    items_.emplace(name, std::move(p));
    return ref;
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = items_.find(name);
    if (it == items_.end()) throw InvalidConfigError("unknown parameter: " + name);
    return *it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end()) throw InvalidConfigError("unknown parameter: " + name);
    return *it->second;
}

std::vector<Parameter*> ParamStore::all() {
    std::vector<Parameter*> v;
    v.reserve(items_.size());
    for (auto& kv : items_) v.push_back(kv.second.get());
    return v;
}

std::vector<const Parameter*> ParamStore::all() const {
    std::vector<const Parameter*> v;
    v.reserve(items_.size());
    for (const auto& kv : items_) v.push_back(kv.second.get());
    return v;
}

void ParamStore::zero_grads() {
    for (auto& kv : items_) std::fill(kv.second->grad.data.begin(), kv.second->grad.data.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Tape plumbing

size_t Tape::check(NodeId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
        throw InvalidInputError("tape: node id out of range");
    return static_cast<size_t>(id);
}

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
    Node& n = nodes_[check(id)];
    if (n.grad.numel() == 0) n.grad = Tensor(n.value.n, n.value.c, n.value.h, n.value.w);
    return n.grad;
}

const Tensor& Tape::grad(NodeId id) const {
    const Node& n = nodes_[check(id)];
    if (n.grad.numel() == 0) throw InvalidInputError("tape: gradient not computed for node");
    return n.grad;
}

NodeId Tape::constant(Tensor v, Domain d) {
    Node n;
    n.value = std::move(v);
    n.domain = d;
    n.op = "constant";
    return push(std::move(n));
}

NodeId Tape::leaf(Parameter& p, Domain d) {
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    n.domain = d;
    n.op = "leaf";
    n.param = &p;
    return push(std::move(n));
}

NodeId Tape::unary(const char* op, NodeId a, Tensor out, std::function<void()> bw, Domain d) {
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(a);
    n.domain = d;
    n.op = op;
    n.parents = {a};
    if (n.requires_grad) n.backward = std::move(bw);
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Elementwise primitives

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
        throw InvalidInputError("add: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out = va;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] += vb.data[i];
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(a) || wants(b);
    n.domain = nodes_[check(a)].domain;
    n.op = "add";
    n.parents = {a, b};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (wants(a)) {
                Tensor& ga = grad_buf(a);
                for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
            }
            if (wants(b)) {
                Tensor& gb = grad_buf(b);
                for (size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i];
            }
        };
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
        throw InvalidInputError("sub: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out = va;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= vb.data[i];
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(a) || wants(b);
    n.domain = nodes_[check(a)].domain;
    n.op = "sub";
    n.parents = {a, b};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            if (wants(a)) {
                Tensor& ga = grad_buf(a);
                for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
            }
            if (wants(b)) {
                Tensor& gb = grad_buf(b);
                for (size_t i = 0; i < g.numel(); ++i) gb.data[i] -= g.data[i];
            }
        };
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
        throw InvalidInputError("mul: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out = va;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= vb.data[i];
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(a) || wants(b);
    n.domain = nodes_[check(a)].domain;
    n.op = "mul";
    n.parents = {a, b};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            const Tensor& va2 = nodes_[check(a)].value;
            const Tensor& vb2 = nodes_[check(b)].value;
            if (wants(a)) {
                Tensor& ga = grad_buf(a);
                for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * vb2.data[i];
            }
            if (wants(b)) {
                Tensor& gb = grad_buf(b);
                for (size_t i = 0; i < g.numel(); ++i) gb.data[i] += g.data[i] * va2.data[i];
            }
        };
    return push(std::move(n));
}

NodeId Tape::div(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb))
        throw InvalidInputError("div: shape mismatch " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out = va;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] /= vb.data[i];
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(a) || wants(b);
    n.domain = nodes_[check(a)].domain;
    n.op = "div";
    n.parents = {a, b};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, a, b]() {
            const Tensor& g = nodes_[id].grad;
            const Tensor& va2 = nodes_[check(a)].value;
            const Tensor& vb2 = nodes_[check(b)].value;
            if (wants(a)) {
                Tensor& ga = grad_buf(a);
                for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] / vb2.data[i];
            }
            if (wants(b)) {
                Tensor& gb = grad_buf(b);
                for (size_t i = 0; i < g.numel(); ++i)
                    gb.data[i] -= g.data[i] * va2.data[i] / (vb2.data[i] * vb2.data[i]);
            }
        };
    return push(std::move(n));
}

NodeId Tape::scalar_mul(NodeId a, double s) {
    Tensor out = value(a);
    for (double& v : out.data) v *= s;
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("scalar_mul", a, std::move(out),
                 [this, id, a, s]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += s * g.data[i];
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::add_scalar(NodeId a, double s) {
    Tensor out = value(a);
    for (double& v : out.data) v += s;
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("add_scalar", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::pow_const(NodeId a, double p) {
    Tensor out = value(a);
    for (double& v : out.data) v = std::pow(v, p);
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("pow_const", a, std::move(out),
                 [this, id, a, p]() {
                     const Tensor& g = nodes_[id].grad;
                     const Tensor& va = nodes_[check(a)].value;
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < g.numel(); ++i)
                         ga.data[i] += g.data[i] * p * std::pow(va.data[i], p - 1.0);
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::relu(NodeId a) {
    Tensor out = value(a);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("relu", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     const Tensor& va = nodes_[check(a)].value;
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < g.numel(); ++i)
                         if (va.data[i] > 0.0) ga.data[i] += g.data[i];
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::leaky_relu(NodeId a, double slope) {
    Tensor out = value(a);
    for (double& v : out.data) v = v > 0.0 ? v : slope * v;
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("leaky_relu", a, std::move(out),
                 [this, id, a, slope]() {
                     const Tensor& g = nodes_[id].grad;
                     const Tensor& va = nodes_[check(a)].value;
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < g.numel(); ++i)
                         ga.data[i] += g.data[i] * (va.data[i] > 0.0 ? 1.0 : slope);
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::charbonnier(NodeId a, double eps) {
    const Tensor& va = value(a);
    Tensor out = va;
    for (double& v : out.data) v = std::sqrt(v * v + eps * eps) - eps;
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("charbonnier", a, std::move(out),
                 [this, id, a, eps]() {
                     const Tensor& g = nodes_[id].grad;
                     const Tensor& v = nodes_[check(a)].value;
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < g.numel(); ++i)
                         ga.data[i] +=
                             g.data[i] * v.data[i] / std::sqrt(v.data[i] * v.data[i] + eps * eps);
                 },
                 nodes_[check(a)].domain);
}

// ---------------------------------------------------------------------------
// Shape / structure primitives

NodeId Tape::concat(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw InvalidInputError("concat: empty part list");
    const Tensor& first = value(parts[0]);
    int ctot = 0;
    bool rg = false;
    for (NodeId p : parts) {
        const Tensor& v = value(p);
        if (v.n != first.n || v.h != first.h || v.w != first.w)
            throw InvalidInputError("concat: non-channel dims must agree");
        ctot += v.c;
        rg = rg || wants(p);
    }
    Tensor out(first.n, ctot, first.h, first.w);
    int coff = 0;
    for (NodeId p : parts) {
        const Tensor& v = value(p);
        for (int in = 0; in < v.n; ++in)
            for (int ic = 0; ic < v.c; ++ic)
                std::copy_n(&v.at(in, ic, 0, 0), static_cast<size_t>(v.h) * v.w,
                            &out.at(in, coff + ic, 0, 0));
        coff += v.c;
    }
    Node n;
    n.value = std::move(out);
    n.requires_grad = rg;
    n.domain = nodes_[check(parts[0])].domain;
    n.op = "concat";
    n.parents = parts;
    NodeId id = static_cast<NodeId>(nodes_.size());
    std::vector<NodeId> ps = parts;
    if (rg)
        n.backward = [this, id, ps]() {
            const Tensor& g = nodes_[id].grad;
            int off = 0;
            for (NodeId p : ps) {
                const Tensor& v = nodes_[check(p)].value;
                if (wants(p)) {
                    Tensor& gp = grad_buf(p);
                    for (int in = 0; in < v.n; ++in)
                        for (int ic = 0; ic < v.c; ++ic) {
                            const double* src = &g.at(in, off + ic, 0, 0);
                            double* dst = &gp.at(in, ic, 0, 0);
                            for (size_t i = 0; i < static_cast<size_t>(v.h) * v.w; ++i)
                                dst[i] += src[i];
                        }
                }
                off += v.c;
            }
        };
    return push(std::move(n));
}

NodeId Tape::slice(NodeId a, int c0, int c1) {
    const Tensor& va = value(a);
    if (c0 < 0 || c1 > va.c || c0 >= c1)
        throw InvalidInputError("slice: bad channel range");
    Tensor out(va.n, c1 - c0, va.h, va.w);
    for (int in = 0; in < va.n; ++in)
        for (int ic = c0; ic < c1; ++ic)
            std::copy_n(&va.at(in, ic, 0, 0), static_cast<size_t>(va.h) * va.w,
                        &out.at(in, ic - c0, 0, 0));
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("slice", a, std::move(out),
                 [this, id, a, c0, c1]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < g.n; ++in)
                         for (int ic = c0; ic < c1; ++ic) {
                             const double* src = &g.at(in, ic - c0, 0, 0);
                             double* dst = &ga.at(in, ic, 0, 0);
                             for (size_t i = 0; i < static_cast<size_t>(g.h) * g.w; ++i)
                                 dst[i] += src[i];
                         }
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::avgpool2(NodeId a) {
    const Tensor& va = value(a);
    if (va.h < 2 || va.w < 2) throw InvalidInputError("avgpool2: input too small");
    Tensor out(va.n, va.c, va.h / 2, va.w / 2);
    for (int in = 0; in < va.n; ++in)
        for (int ic = 0; ic < va.c; ++ic)
            for (int r = 0; r < out.h; ++r)
                for (int c = 0; c < out.w; ++c)
                    out.at(in, ic, r, c) =
                        0.25 * (va.at(in, ic, 2 * r, 2 * c) + va.at(in, ic, 2 * r, 2 * c + 1) +
                                va.at(in, ic, 2 * r + 1, 2 * c) +
                                va.at(in, ic, 2 * r + 1, 2 * c + 1));
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("avgpool2", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < g.n; ++in)
                         for (int ic = 0; ic < g.c; ++ic)
                             for (int r = 0; r < g.h; ++r)
                                 for (int c = 0; c < g.w; ++c) {
                                     const double gv = 0.25 * g.at(in, ic, r, c);
                                     ga.at(in, ic, 2 * r, 2 * c) += gv;
                                     ga.at(in, ic, 2 * r, 2 * c + 1) += gv;
                                     ga.at(in, ic, 2 * r + 1, 2 * c) += gv;
                                     ga.at(in, ic, 2 * r + 1, 2 * c + 1) += gv;
                                 }
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::nearest_upsample2(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(va.n, va.c, va.h * 2, va.w * 2);
    for (int in = 0; in < va.n; ++in)
        for (int ic = 0; ic < va.c; ++ic)
            for (int r = 0; r < va.h; ++r)
                for (int c = 0; c < va.w; ++c) {
                    const double v = va.at(in, ic, r, c);
                    out.at(in, ic, 2 * r, 2 * c) = v;
                    out.at(in, ic, 2 * r, 2 * c + 1) = v;
                    out.at(in, ic, 2 * r + 1, 2 * c) = v;
                    out.at(in, ic, 2 * r + 1, 2 * c + 1) = v;
                }
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("nearest_upsample2", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < ga.n; ++in)
                         for (int ic = 0; ic < ga.c; ++ic)
                             for (int r = 0; r < ga.h; ++r)
                                 for (int c = 0; c < ga.w; ++c)
                                     ga.at(in, ic, r, c) +=
                                         g.at(in, ic, 2 * r, 2 * c) + g.at(in, ic, 2 * r, 2 * c + 1) +
                                         g.at(in, ic, 2 * r + 1, 2 * c) +
                                         g.at(in, ic, 2 * r + 1, 2 * c + 1);
                 },
                 nodes_[check(a)].domain);
}

namespace {
// Channel layout of dwt_layer: input channel ic maps to output channels
// [4*ic .. 4*ic+3] = (LL, LH, HL, HH).
void dwt_forward_all(const Tensor& x, Tensor& out, WaveletFamily fam) {
    const int h2 = x.h / 2, w2 = x.w / 2;
    const size_t q = static_cast<size_t>(h2) * w2;
    std::vector<double> ll(q), lh(q), hl(q), hh(q);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            dwt2_level<double>(&x.at(in, ic, 0, 0), x.h, x.w, fam, ll.data(), lh.data(), hl.data(),
                               hh.data());
            std::copy(ll.begin(), ll.end(), &out.at(in, 4 * ic + 0, 0, 0));
            std::copy(lh.begin(), lh.end(), &out.at(in, 4 * ic + 1, 0, 0));
            std::copy(hl.begin(), hl.end(), &out.at(in, 4 * ic + 2, 0, 0));
            std::copy(hh.begin(), hh.end(), &out.at(in, 4 * ic + 3, 0, 0));
        }
}

void idwt_forward_all(const Tensor& x, Tensor& out, WaveletFamily fam) {
    for (int in = 0; in < x.n; ++in)
        for (int oc = 0; oc < out.c; ++oc)
            idwt2_level<double>(&x.at(in, 4 * oc + 0, 0, 0), &x.at(in, 4 * oc + 1, 0, 0),
                                &x.at(in, 4 * oc + 2, 0, 0), &x.at(in, 4 * oc + 3, 0, 0), out.h,
                                out.w, fam, &out.at(in, oc, 0, 0));
}
} // namespace

NodeId Tape::dwt_layer(NodeId a, WaveletFamily family) {
    const Tensor& va = value(a);
    if (va.h % 2 != 0 || va.w % 2 != 0)
        throw InvalidInputError("dwt_layer: spatial dims must be even");
    Tensor out(va.n, va.c * 4, va.h / 2, va.w / 2);
    dwt_forward_all(va, out, family);
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("dwt_layer", a, std::move(out),
                 [this, id, a, family]() {
                     // orthonormal: backward = inverse transform of the gradient
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     Tensor tmp(ga.n, ga.c, ga.h, ga.w);
                     idwt_forward_all(g, tmp, family);
                     for (size_t i = 0; i < ga.numel(); ++i) ga.data[i] += tmp.data[i];
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::idwt_layer(NodeId a, WaveletFamily family) {
    const Tensor& va = value(a);
    if (va.c % 4 != 0) throw InvalidInputError("idwt_layer: channels must be divisible by 4");
    Tensor out(va.n, va.c / 4, va.h * 2, va.w * 2);
    idwt_forward_all(va, out, family);
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("idwt_layer", a, std::move(out),
                 [this, id, a, family]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     Tensor tmp(ga.n, ga.c, ga.h, ga.w);
                     dwt_forward_all(g, tmp, family);
                     for (size_t i = 0; i < ga.numel(); ++i) ga.data[i] += tmp.data[i];
                 },
                 nodes_[check(a)].domain);
}

// ---------------------------------------------------------------------------
// conv2d / bias / reductions

NodeId Tape::conv2d(NodeId x, NodeId w, Padding pad) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    if (nodes_[check(x)].domain == Domain::kspace)
        throw InvalidInputError("conv2d: refusing to convolve a k-space-domain tensor");
    if (vw.c != vx.c)
        throw InvalidInputError("conv2d: weight input channels " + std::to_string(vw.c) +
                                " do not match input " + std::to_string(vx.c));
    if (vw.h % 2 == 0 || vw.w % 2 == 0) throw InvalidInputError("conv2d: kernel must be odd");
    const int kh = vw.h, kw = vw.w;
    const int ph = pad == Padding::same ? kh / 2 : 0;
    const int pw = pad == Padding::same ? kw / 2 : 0;
    const int oh = pad == Padding::same ? vx.h : vx.h - kh + 1;
    const int ow = pad == Padding::same ? vx.w : vx.w - kw + 1;
    if (oh <= 0 || ow <= 0) throw InvalidInputError("conv2d: kernel larger than input");

    Tensor out(vx.n, vw.n, oh, ow);
    for (int in = 0; in < vx.n; ++in)
        for (int oc = 0; oc < vw.n; ++oc)
            for (int ic = 0; ic < vx.c; ++ic)
                for (int u = 0; u < kh; ++u) {
                    const int rlo = std::max(0, ph - u);
                    const int rhi = std::min(oh, vx.h + ph - u);
                    for (int v = 0; v < kw; ++v) {
                        const double wv = vw.at(oc, ic, u, v);
                        if (wv == 0.0) continue;
                        const int clo = std::max(0, pw - v);
                        const int chi = std::min(ow, vx.w + pw - v);
                        for (int r = rlo; r < rhi; ++r) {
                            const double* src = &vx.at(in, ic, r + u - ph, clo + v - pw);
                            double* dst = &out.at(in, oc, r, clo);
                            for (int c = 0; c < chi - clo; ++c) dst[c] += wv * src[c];
                        }
                    }
                }

    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(x) || wants(w);
    n.domain = nodes_[check(x)].domain;
    n.op = "conv2d";
    n.parents = {x, w};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, x, w, ph, pw]() {
            const Tensor& g = nodes_[id].grad;
            const Tensor& vx2 = nodes_[check(x)].value;
            const Tensor& vw2 = nodes_[check(w)].value;
            const int kh2 = vw2.h, kw2 = vw2.w;
            if (wants(x)) {
                Tensor& gx = grad_buf(x);
                for (int in = 0; in < vx2.n; ++in)
                    for (int oc = 0; oc < vw2.n; ++oc)
                        for (int ic = 0; ic < vx2.c; ++ic)
                            for (int u = 0; u < kh2; ++u) {
                                const int rlo = std::max(0, ph - u);
                                const int rhi = std::min(g.h, vx2.h + ph - u);
                                for (int v = 0; v < kw2; ++v) {
                                    const double wv = vw2.at(oc, ic, u, v);
                                    if (wv == 0.0) continue;
                                    const int clo = std::max(0, pw - v);
                                    const int chi = std::min(g.w, vx2.w + pw - v);
                                    for (int r = rlo; r < rhi; ++r) {
                                        const double* src = &g.at(in, oc, r, clo);
                                        double* dst = &gx.at(in, ic, r + u - ph, clo + v - pw);
                                        for (int c = 0; c < chi - clo; ++c) dst[c] += wv * src[c];
                                    }
                                }
                            }
            }
            if (wants(w)) {
                Tensor& gw = grad_buf(w);
                for (int in = 0; in < vx2.n; ++in)
                    for (int oc = 0; oc < vw2.n; ++oc)
                        for (int ic = 0; ic < vx2.c; ++ic)
                            for (int u = 0; u < kh2; ++u) {
                                const int rlo = std::max(0, ph - u);
                                const int rhi = std::min(g.h, vx2.h + ph - u);
                                for (int v = 0; v < kw2; ++v) {
                                    const int clo = std::max(0, pw - v);
                                    const int chi = std::min(g.w, vx2.w + pw - v);
                                    double acc = 0.0;
                                    for (int r = rlo; r < rhi; ++r) {
                                        const double* gs = &g.at(in, oc, r, clo);
                                        const double* xs = &vx2.at(in, ic, r + u - ph, clo + v - pw);
                                        for (int c = 0; c < chi - clo; ++c) acc += gs[c] * xs[c];
                                    }
                                    gw.at(oc, ic, u, v) += acc;
                                }
                            }
            }
        };
    return push(std::move(n));
}

NodeId Tape::bias_add(NodeId x, NodeId b) {
    const Tensor& vx = value(x);
    const Tensor& vb = value(b);
    if (vb.n != 1 || vb.h != 1 || vb.w != 1 || vb.c != vx.c)
        throw InvalidInputError("bias_add: bias must be 1xCx1x1 matching input channels");
    Tensor out = vx;
    for (int in = 0; in < vx.n; ++in)
        for (int ic = 0; ic < vx.c; ++ic) {
            const double bv = vb.data[static_cast<size_t>(ic)];
            double* dst = &out.at(in, ic, 0, 0);
            for (size_t i = 0; i < static_cast<size_t>(vx.h) * vx.w; ++i) dst[i] += bv;
        }
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(x) || wants(b);
    n.domain = nodes_[check(x)].domain;
    n.op = "bias_add";
    n.parents = {x, b};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, x, b]() {
            const Tensor& g = nodes_[id].grad;
            if (wants(x)) {
                Tensor& gx = grad_buf(x);
                for (size_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
            }
            if (wants(b)) {
                Tensor& gb = grad_buf(b);
                for (int in = 0; in < g.n; ++in)
                    for (int ic = 0; ic < g.c; ++ic) {
                        const double* src = &g.at(in, ic, 0, 0);
                        double acc = 0.0;
                        for (size_t i = 0; i < static_cast<size_t>(g.h) * g.w; ++i) acc += src[i];
                        gb.data[static_cast<size_t>(ic)] += acc;
                    }
            }
        };
    return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
    const Tensor& va = value(a);
    double acc = 0.0;
    for (double v : va.data) acc += v;
    const double inv = 1.0 / static_cast<double>(va.numel());
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("mean", a, Tensor::scalar(acc * inv),
                 [this, id, a, inv]() {
                     const double g = nodes_[id].grad.data[0] * inv;
                     Tensor& ga = grad_buf(a);
                     for (double& v : ga.data) v += g;
                 },
                 Domain::none);
}

NodeId Tape::sum(NodeId a) {
    const Tensor& va = value(a);
    double acc = 0.0;
    for (double v : va.data) acc += v;
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("sum", a, Tensor::scalar(acc),
                 [this, id, a]() {
                     const double g = nodes_[id].grad.data[0];
                     Tensor& ga = grad_buf(a);
                     for (double& v : ga.data) v += g;
                 },
                 Domain::none);
}

// ---------------------------------------------------------------------------
// Complex / measurement-model primitives

NodeId Tape::cmag(NodeId a) {
    const Tensor& va = value(a);
    if (va.c % 2 != 0) throw InvalidInputError("cmag: channel count must be even (re/im pairs)");
    Tensor out(va.n, va.c / 2, va.h, va.w);
    for (int in = 0; in < va.n; ++in)
        for (int k = 0; k < out.c; ++k)
            for (int r = 0; r < va.h; ++r)
                for (int c = 0; c < va.w; ++c)
                    out.at(in, k, r, c) =
                        std::hypot(va.at(in, 2 * k, r, c), va.at(in, 2 * k + 1, r, c));
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("cmag", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     const Tensor& v = nodes_[check(a)].value;
                     const Tensor& o = nodes_[id].value;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < g.n; ++in)
                         for (int k = 0; k < g.c; ++k)
                             for (int r = 0; r < g.h; ++r)
                                 for (int c = 0; c < g.w; ++c) {
                                     const double m = o.at(in, k, r, c);
                                     if (m <= 0.0) continue; // subgradient 0 at the origin
                                     const double gv = g.at(in, k, r, c) / m;
                                     ga.at(in, 2 * k, r, c) += gv * v.at(in, 2 * k, r, c);
                                     ga.at(in, 2 * k + 1, r, c) += gv * v.at(in, 2 * k + 1, r, c);
                                 }
                 },
                 Domain::none);
}

namespace {
// Apply the centered unitary transform to every (re, im) channel pair.
Tensor fft_pairs(const Tensor& x, int sign) {
    Tensor out(x.n, x.c, x.h, x.w);
    std::vector<cplx> buf(static_cast<size_t>(x.h) * x.w);
    for (int in = 0; in < x.n; ++in)
        for (int k = 0; k < x.c / 2; ++k) {
            const double* re = &x.at(in, 2 * k, 0, 0);
            const double* im = &x.at(in, 2 * k + 1, 0, 0);
            for (size_t i = 0; i < buf.size(); ++i) buf[i] = cplx(re[i], im[i]);
            fft2c_raw(buf.data(), x.h, x.w, sign);
            double* ore = &out.at(in, 2 * k, 0, 0);
            double* oim = &out.at(in, 2 * k + 1, 0, 0);
            for (size_t i = 0; i < buf.size(); ++i) {
                ore[i] = buf[i].real();
                oim[i] = buf[i].imag();
            }
        }
    return out;
}
} // namespace

NodeId Tape::fftc(NodeId a) {
    const Tensor& va = value(a);
    if (va.c % 2 != 0) throw InvalidInputError("fftc: channel count must be even (re/im pairs)");
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("fftc", a, fft_pairs(va, -1),
                 [this, id, a]() {
                     // unitary: adjoint = inverse transform of the gradient
                     Tensor gt = fft_pairs(nodes_[id].grad, +1);
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < ga.numel(); ++i) ga.data[i] += gt.data[i];
                 },
                 Domain::kspace);
}

NodeId Tape::ifftc(NodeId a) {
    const Tensor& va = value(a);
    if (va.c % 2 != 0) throw InvalidInputError("ifftc: channel count must be even (re/im pairs)");
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("ifftc", a, fft_pairs(va, +1),
                 [this, id, a]() {
                     Tensor gt = fft_pairs(nodes_[id].grad, -1);
                     Tensor& ga = grad_buf(a);
                     for (size_t i = 0; i < ga.numel(); ++i) ga.data[i] += gt.data[i];
                 },
                 Domain::image);
}

NodeId Tape::mask_rows(NodeId a, const SamplingMask& mask) {
    const Tensor& va = value(a);
    if (mask.height != va.h || mask.width != va.w)
        throw InvalidInputError("mask_rows: mask shape mismatch");
    std::vector<uint8_t> lines = mask.line_selected;
    Tensor out = va;
    for (int in = 0; in < va.n; ++in)
        for (int ic = 0; ic < va.c; ++ic)
            for (int r = 0; r < va.h; ++r)
                if (!lines[static_cast<size_t>(r)])
                    std::fill_n(&out.at(in, ic, r, 0), va.w, 0.0);
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("mask_rows", a, std::move(out),
                 [this, id, a, lines]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < g.n; ++in)
                         for (int ic = 0; ic < g.c; ++ic)
                             for (int r = 0; r < g.h; ++r) {
                                 if (!lines[static_cast<size_t>(r)]) continue;
                                 const double* src = &g.at(in, ic, r, 0);
                                 double* dst = &ga.at(in, ic, r, 0);
                                 for (int c = 0; c < g.w; ++c) dst[c] += src[c];
                             }
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::sum_coils(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(1, va.c, va.h, va.w);
    for (int in = 0; in < va.n; ++in)
        for (size_t i = 0; i < out.numel(); ++i)
            out.data[i] += va.data[static_cast<size_t>(in) * out.numel() + i];
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("sum_coils", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < ga.n; ++in)
                         for (size_t i = 0; i < g.numel(); ++i)
                             ga.data[static_cast<size_t>(in) * g.numel() + i] += g.data[i];
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::broadcast_coils(NodeId a, int coils) {
    const Tensor& va = value(a);
    if (va.n != 1) throw InvalidInputError("broadcast_coils: input batch must be 1");
    if (coils < 1) throw InvalidConfigError("broadcast_coils: coils must be >= 1");
    Tensor out(coils, va.c, va.h, va.w);
    for (int in = 0; in < coils; ++in)
        std::copy(va.data.begin(), va.data.end(),
                  out.data.begin() + static_cast<size_t>(in) * va.numel());
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("broadcast_coils", a, std::move(out),
                 [this, id, a]() {
                     const Tensor& g = nodes_[id].grad;
                     Tensor& ga = grad_buf(a);
                     for (int in = 0; in < g.n; ++in)
                         for (size_t i = 0; i < ga.numel(); ++i)
                             ga.data[i] += g.data[static_cast<size_t>(in) * ga.numel() + i];
                 },
                 nodes_[check(a)].domain);
}

NodeId Tape::scalar_param_mul(NodeId x, NodeId s) {
    const Tensor& vx = value(x);
    const Tensor& vs = value(s);
    if (vs.numel() != 1) throw InvalidInputError("scalar_param_mul: scale must be a scalar node");
    const double sv = vs.data[0];
    Tensor out = vx;
    for (double& v : out.data) v *= sv;
    Node n;
    n.value = std::move(out);
    n.requires_grad = wants(x) || wants(s);
    n.domain = nodes_[check(x)].domain;
    n.op = "scalar_param_mul";
    n.parents = {x, s};
    NodeId id = static_cast<NodeId>(nodes_.size());
    if (n.requires_grad)
        n.backward = [this, id, x, s, sv]() {
            const Tensor& g = nodes_[id].grad;
            const Tensor& vx2 = nodes_[check(x)].value;
            if (wants(x)) {
                Tensor& gx = grad_buf(x);
                for (size_t i = 0; i < g.numel(); ++i) gx.data[i] += sv * g.data[i];
            }
            if (wants(s)) {
                double acc = 0.0;
                for (size_t i = 0; i < g.numel(); ++i) acc += g.data[i] * vx2.data[i];
                grad_buf(s).data[0] += acc;
            }
        };
    return push(std::move(n));
}

NodeId Tape::renorm_maps(NodeId maps, const std::vector<uint8_t>& support) {
    const Tensor& vm = value(maps);
    if (vm.c != 2) throw InvalidInputError("renorm_maps: expected Lx2xHxW maps tensor");
    if (support.size() != static_cast<size_t>(vm.h) * vm.w)
        throw InvalidInputError("renorm_maps: support size mismatch");
    const size_t plane = static_cast<size_t>(vm.h) * vm.w;
    // per-pixel root-sum-of-squares over coils and re/im
    std::vector<double> norm(plane, 0.0);
    for (int l = 0; l < vm.n; ++l)
        for (int ch = 0; ch < 2; ++ch) {
            const double* src = &vm.at(l, ch, 0, 0);
            for (size_t i = 0; i < plane; ++i) norm[i] += src[i] * src[i];
        }
    for (size_t i = 0; i < plane; ++i) norm[i] = std::sqrt(norm[i]);

    Tensor out(vm.n, 2, vm.h, vm.w);
    std::vector<uint8_t> sup = support;
    for (int l = 0; l < vm.n; ++l)
        for (int ch = 0; ch < 2; ++ch) {
            const double* src = &vm.at(l, ch, 0, 0);
            double* dst = &out.at(l, ch, 0, 0);
            for (size_t i = 0; i < plane; ++i)
                dst[i] = (sup[i] && norm[i] > 0.0) ? src[i] / norm[i] : 0.0;
        }
    NodeId id = static_cast<NodeId>(nodes_.size());
    return unary("renorm_maps", maps, std::move(out),
                 [this, id, maps, sup, norm, plane]() {
                     // v -> v/||v|| per pixel: g_v = g/n - v <g, v> / n^3
                     const Tensor& g = nodes_[id].grad;
                     const Tensor& v = nodes_[check(maps)].value;
                     Tensor& gm = grad_buf(maps);
                     std::vector<double> dot(plane, 0.0);
                     for (int l = 0; l < v.n; ++l)
                         for (int ch = 0; ch < 2; ++ch) {
                             const double* gs = &g.at(l, ch, 0, 0);
                             const double* vs = &v.at(l, ch, 0, 0);
                             for (size_t i = 0; i < plane; ++i) dot[i] += gs[i] * vs[i];
                         }
                     for (int l = 0; l < v.n; ++l)
                         for (int ch = 0; ch < 2; ++ch) {
                             const double* gs = &g.at(l, ch, 0, 0);
                             const double* vs = &v.at(l, ch, 0, 0);
                             double* gd = &gm.at(l, ch, 0, 0);
                             for (size_t i = 0; i < plane; ++i) {
                                 if (!sup[i] || norm[i] <= 0.0) continue;
                                 const double n1 = norm[i];
                                 gd[i] += gs[i] / n1 - vs[i] * dot[i] / (n1 * n1 * n1);
                             }
                         }
                 },
                 Domain::image);
}

// ---------------------------------------------------------------------------
// Complex helpers composed from primitives

NodeId Tape::cmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    if (va.c != 2 || value(b).c != 2)
        throw InvalidInputError("cmul: expects Nx2xHxW complex-pair tensors");
    NodeId ar = slice(a, 0, 1), ai = slice(a, 1, 2);
    NodeId br = slice(b, 0, 1), bi = slice(b, 1, 2);
    NodeId re = sub(mul(ar, br), mul(ai, bi));
    NodeId im = add(mul(ar, bi), mul(ai, br));
    return concat({re, im});
}

NodeId Tape::conj(NodeId a) {
    if (value(a).c != 2) throw InvalidInputError("conj: expects Nx2xHxW complex-pair tensor");
    return concat({slice(a, 0, 1), scalar_mul(slice(a, 1, 2), -1.0)});
}

// ---------------------------------------------------------------------------
// Backward sweep

void Tape::backward(NodeId loss) {
    if (ran_backward_) throw InvalidInputError("tape: backward already ran");
    const Node& ln = nodes_[check(loss)];
    if (ln.value.numel() != 1) throw InvalidInputError("backward: loss node must be scalar");
    ran_backward_ = true;
    grad_buf(loss).data[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad || n.grad.numel() == 0) continue;
        if (n.backward) n.backward();
    }
    for (auto& n : nodes_)
        if (n.param && n.grad.numel() != 0)
            for (size_t i = 0; i < n.grad.numel(); ++i) n.param->grad.data[i] += n.grad.data[i];
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

double eval_scalar(const std::function<NodeId(Tape&)>& build) {
    Tape t;
    NodeId loss = build(t);
    const Tensor& v = t.value(loss);
    if (v.numel() != 1) throw InvalidInputError("eval_scalar: build must return a scalar node");
    return v.data[0];
}

GradCheckReport grad_check(ParamStore& params, const std::function<NodeId(Tape&)>& build,
                           double step, int max_coords_per_param, uint64_t seed) {
    params.zero_grads();
    {
        Tape t;
        NodeId loss = build(t);
        t.backward(loss);
    }
    std::map<std::string, Tensor> analytic;
    for (Parameter* p : params.all()) analytic.emplace(p->name, p->grad);

    GradCheckReport rep;
    Rng rng(seed ^ 0x6772616463686bULL);
    for (Parameter* p : params.all()) {
        const size_t n = p->value.numel();
        std::vector<size_t> coords;
        if (n <= static_cast<size_t>(max_coords_per_param)) {
            coords.resize(n);
            for (size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            coords.reserve(static_cast<size_t>(max_coords_per_param));
            for (int i = 0; i < max_coords_per_param; ++i)
                coords.push_back(rng.uniform_int(static_cast<uint64_t>(n)));
        }
        const Tensor& ag = analytic.at(p->name);
        for (size_t idx : coords) {
            const double orig = p->value.data[idx];
            p->value.data[idx] = orig + step;
            const double f1 = eval_scalar(build);
            p->value.data[idx] = orig - step;
            const double f2 = eval_scalar(build);
            p->value.data[idx] = orig;
            const double fd = (f1 - f2) / (2.0 * step);
            const double an = ag.data[idx];
            const double rel = std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)});
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = p->name + "[" + std::to_string(idx) + "]";
            }
        }
    }
    return rep;
}

} // namespace mri
