#include "mri/gradcheck_suites.hpp"

#include <cmath>
#include <functional>

#include "mri/errors.hpp"
#include "mri/kspace.hpp"
#include "mri/loss_graph.hpp"
#include "mri/networks.hpp"
#include "mri/rng.hpp"
#include "mri/sense.hpp"

namespace mri {

namespace {

// Signed values bounded away from zero so kinked activations (relu, cmag,
// charbonnier) are probed only where they are differentiable.
Tensor signed_offset_tensor(int n, int c, int h, int w, Rng& rng, double lo = 0.2,
                            double hi = 1.2) {
    Tensor t(n, c, h, w);
    for (double& v : t.data) {
        double mag = rng.uniform(lo, hi);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

Tensor uniform_tensor(int n, int c, int h, int w, Rng& rng, double lo, double hi) {
    Tensor t(n, c, h, w);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Non-uniform upstream cotangent: mean(op_output . r) for a fixed random r,
// so the checked VJP is probed with distinct per-element weights.
NodeId weighted_mean(Tape& t, NodeId x, uint64_t seed = 0xC0FFEE) {
    const Tensor& v = t.value(x);
    Rng rng(seed);
    Tensor r = uniform_tensor(v.n, v.c, v.h, v.w, rng, 0.5, 1.5);
    return t.mean(t.mul(x, t.constant(std::move(r))));
}

SuiteResult run_case(const std::string& name, ParamStore& ps,
                     const std::function<NodeId(Tape&)>& build, double tol,
                     int max_coords = 50) {
    SuiteResult res;
    res.name = name;
    res.tolerance = tol;
    res.report = grad_check(ps, build, 1e-5, max_coords);
    res.pass = res.report.pass(tol);
    return res;
}

// Zero-initialized final convolutions block gradient flow to every deeper
// parameter (the check would pass vacuously), so the network suites give the
// final weights small random values first.
void randomize_final_convs(ParamStore& ps, double scale, uint64_t seed) {
    Rng rng(seed);
    for (Parameter* p : ps.all()) {
        if (p->name.size() >= 12 &&
            p->name.compare(p->name.size() - 12, 12, "final.weight") == 0) {
            for (double& v : p->value.data) v = scale * rng.normal();
        }
    }
}

// --------------------------------------------------------------- primitives

std::vector<SuiteResult> primitives_suite() {
    const double tol = 1e-4;
    std::vector<SuiteResult> out;
    Rng rng(0x5EED);

    auto binary_case = [&](const std::string& name, auto opfn, bool positive_b) {
        ParamStore ps;
        Parameter& a = ps.create(name + ".a", signed_offset_tensor(1, 2, 4, 4, rng));
        Parameter& b = ps.create(name + ".b",
                                 positive_b ? uniform_tensor(1, 2, 4, 4, rng, 1.0, 2.0)
                                            : signed_offset_tensor(1, 2, 4, 4, rng));
        auto build = [&](Tape& t) {
            return weighted_mean(t, opfn(t, t.leaf(a), t.leaf(b)));
        };
        out.push_back(run_case("primitive/" + name, ps, build, tol));
    };

    binary_case("add", [](Tape& t, NodeId a, NodeId b) { return t.add(a, b); }, false);
    binary_case("sub", [](Tape& t, NodeId a, NodeId b) { return t.sub(a, b); }, false);
    binary_case("mul", [](Tape& t, NodeId a, NodeId b) { return t.mul(a, b); }, false);
    binary_case("div", [](Tape& t, NodeId a, NodeId b) { return t.div(a, b); }, true);

    auto unary_case = [&](const std::string& name, auto opfn, Tensor init) {
        ParamStore ps;
        Parameter& a = ps.create(name + ".a", std::move(init));
        auto build = [&](Tape& t) { return weighted_mean(t, opfn(t, t.leaf(a))); };
        out.push_back(run_case("primitive/" + name, ps, build, tol));
    };

    unary_case("scalar_mul", [](Tape& t, NodeId a) { return t.scalar_mul(a, 1.7); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("add_scalar", [](Tape& t, NodeId a) { return t.add_scalar(a, 0.3); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("pow_const", [](Tape& t, NodeId a) { return t.pow_const(a, 1.7); },
               uniform_tensor(1, 2, 4, 4, rng, 0.5, 1.5));
    unary_case("relu", [](Tape& t, NodeId a) { return t.relu(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("leaky_relu", [](Tape& t, NodeId a) { return t.leaky_relu(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("charbonnier", [](Tape& t, NodeId a) { return t.charbonnier(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("slice", [](Tape& t, NodeId a) { return t.slice(a, 1, 3); },
               signed_offset_tensor(1, 4, 3, 3, rng));
    unary_case("avgpool2", [](Tape& t, NodeId a) { return t.avgpool2(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("nearest_upsample2",
               [](Tape& t, NodeId a) { return t.nearest_upsample2(a); },
               signed_offset_tensor(1, 2, 2, 2, rng));
    unary_case("dwt_layer", [](Tape& t, NodeId a) { return t.dwt_layer(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("idwt_layer", [](Tape& t, NodeId a) { return t.idwt_layer(a); },
               signed_offset_tensor(1, 4, 3, 3, rng));
    unary_case("mean", [](Tape& t, NodeId a) { return t.scalar_mul(t.mean(t.mul(a, a)), 0.5); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("sum", [](Tape& t, NodeId a) { return t.scalar_mul(t.sum(t.mul(a, a)), 0.5); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("cmag", [](Tape& t, NodeId a) { return t.cmag(a); },
               signed_offset_tensor(1, 2, 4, 4, rng, 0.5, 1.5));
    unary_case("fftc", [](Tape& t, NodeId a) { return t.fftc(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("ifftc", [](Tape& t, NodeId a) { return t.ifftc(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("sum_coils", [](Tape& t, NodeId a) { return t.sum_coils(a); },
               signed_offset_tensor(3, 2, 4, 4, rng));
    unary_case("broadcast_coils",
               [](Tape& t, NodeId a) { return t.broadcast_coils(a, 3); },
               signed_offset_tensor(1, 2, 4, 4, rng));
    unary_case("conj", [](Tape& t, NodeId a) { return t.conj(a); },
               signed_offset_tensor(1, 2, 4, 4, rng));

    {
        SamplingMask mask = make_mask(4, 4, 2, 2, 0);
        ParamStore ps;
        Parameter& a = ps.create("mask_rows.a", signed_offset_tensor(1, 2, 4, 4, rng));
        auto build = [&](Tape& t) { return weighted_mean(t, t.mask_rows(t.leaf(a), mask)); };
        out.push_back(run_case("primitive/mask_rows", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& a = ps.create("concat.a", signed_offset_tensor(1, 2, 3, 3, rng));
        Parameter& b = ps.create("concat.b", signed_offset_tensor(1, 3, 3, 3, rng));
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.concat({t.leaf(a), t.leaf(b)}));
        };
        out.push_back(run_case("primitive/concat", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& x = ps.create("conv2d.x", signed_offset_tensor(1, 2, 6, 6, rng));
        Parameter& w = ps.create("conv2d.w", signed_offset_tensor(2, 2, 3, 3, rng));
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.conv2d(t.leaf(x), t.leaf(w)));
        };
        out.push_back(run_case("primitive/conv2d", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& x = ps.create("conv2d_valid.x", signed_offset_tensor(1, 2, 6, 6, rng));
        Parameter& w = ps.create("conv2d_valid.w", signed_offset_tensor(2, 2, 3, 3, rng));
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.conv2d(t.leaf(x), t.leaf(w), Padding::valid));
        };
        out.push_back(run_case("primitive/conv2d_valid", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& x = ps.create("bias_add.x", signed_offset_tensor(1, 3, 4, 4, rng));
        Parameter& b = ps.create("bias_add.b", signed_offset_tensor(1, 3, 1, 1, rng));
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.bias_add(t.leaf(x), t.leaf(b)));
        };
        out.push_back(run_case("primitive/bias_add", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& x = ps.create("scalar_param_mul.x", signed_offset_tensor(1, 2, 3, 3, rng));
        Tensor s0(1, 1, 1, 1);
        s0.data[0] = 0.7;
        Parameter& s = ps.create("scalar_param_mul.s", s0);
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.scalar_param_mul(t.leaf(x), t.leaf(s)));
        };
        out.push_back(run_case("primitive/scalar_param_mul", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& m = ps.create("renorm_maps.m", signed_offset_tensor(2, 2, 4, 4, rng, 0.5, 1.5));
        std::vector<uint8_t> support(16, 1);
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.renorm_maps(t.leaf(m), support));
        };
        out.push_back(run_case("primitive/renorm_maps", ps, build, tol));
    }
    {
        ParamStore ps;
        Parameter& a = ps.create("cmul.a", signed_offset_tensor(1, 2, 4, 4, rng));
        Parameter& b = ps.create("cmul.b", signed_offset_tensor(1, 2, 4, 4, rng));
        auto build = [&](Tape& t) {
            return weighted_mean(t, t.cmul(t.leaf(a), t.leaf(b)));
        };
        out.push_back(run_case("primitive/cmul", ps, build, tol));
    }
    return out;
}

// ----------------------------------------------------------- network suites

std::vector<SuiteResult> mwcnn_suite() {
    MwcnnConfig cfg; // default width: scales 3, filters {32, 64, 128}, 2 blocks

    ParamStore ps;
    Rng rng(0x7077);
    init_mwcnn_params(ps, "net.", cfg, 2, 2, rng);
    randomize_final_convs(ps, 0.02, 0xF17A);

    Rng drng(0xDA7A);
    Tensor x0 = signed_offset_tensor(1, 2, 32, 32, drng, 0.5, 1.5);
    Tensor tgt(1, 1, 32, 32);
    for (int i = 0; i < 32 * 32; ++i) {
        double re = x0.data[static_cast<size_t>(i)];
        double im = x0.data[static_cast<size_t>(32 * 32 + i)];
        tgt.data[static_cast<size_t>(i)] = 0.9 * std::hypot(re, im);
    }

    auto build = [&](Tape& t) {
        NodeId x = t.constant(x0, Domain::image);
        NodeId corr = mwcnn_forward_graph(t, ps, "net.", x, cfg, 2);
        NodeId pred = t.cmag(t.add(x, corr));
        NodeId target = t.constant(tgt);
        return compound_loss_graph(t, pred, target, 0.5, 0.5, /*data_range=*/2.5);
    };
    return {run_case("network/mwcnn+compound_loss", ps, build, 1e-3)};
}

std::vector<SuiteResult> unet_suite() {
    UnetConfig cfg; // depth 3, base 8

    ComplexImage truth = make_phantom(16, /*smooth_phase=*/true);
    SensitivitySet true_maps = make_coil_maps(16, 2);
    SamplingMask mask = make_mask(16, 16, 2, 4, 0);
    ForwardOperator op;
    op.mask = mask;
    op.maps = true_maps;
    CoilKSpace y = apply_forward(op, truth);
    SensitivitySet maps0 = estimate_maps_lowfreq(y, mask);
    std::vector<uint8_t> support = map_support(maps0);

    ParamStore ps;
    Rng rng(0x0E7);
    init_unet_params(ps, "smaps.", cfg, 2, 2, rng);
    randomize_final_convs(ps, 0.02, 0xF17B);

    Tensor maps_t = tensor_from_maps(maps0);
    Tensor x_t = tensor_from_image(truth);

    auto build = [&](Tape& t) {
        NodeId m0 = t.constant(maps_t, Domain::image);
        NodeId refined = refine_maps_graph(t, ps, "smaps.", m0, support, cfg);
        NodeId y_node = t.constant(tensor_from_coils(y), Domain::kspace);
        NodeId xc = t.constant(x_t, Domain::image);
        NodeId ex = t.mask_rows(t.fftc(t.cmul(refined, t.broadcast_coils(xc, 2))), mask);
        NodeId resid = t.sub(ex, y_node);
        NodeId adj = t.sum_coils(t.cmul(t.conj(refined), t.ifftc(resid)));
        return t.scalar_mul(t.mean(t.mul(adj, adj)), 0.5);
    };
    return {run_case("network/unet_refiner+forward_op", ps, build, 1e-3)};
}

std::vector<SuiteResult> xpdnet_suite() {
    XpdnetConfig cfg;
    cfg.n_unrolled = 2;
    cfg.buffer_size = 2;
    cfg.refine_maps = true;
    cfg.alpha_init = 0.5;
    cfg.mwcnn.scales = 3;
    cfg.mwcnn.filters = {4, 8, 16};
    cfg.mwcnn.blocks_per_scale = 1;
    cfg.mwcnn.kernel = 3;
    cfg.unet.depth = 2;
    cfg.unet.base_filters = 4;
    cfg.unet.kernel = 3;

    ComplexImage truth = make_phantom(16, /*smooth_phase=*/true);
    SensitivitySet true_maps = make_coil_maps(16, 2);
    SamplingMask mask = make_mask(16, 16, 2, 4, 0);
    ForwardOperator op;
    op.mask = mask;
    op.maps = true_maps;
    CoilKSpace y = apply_forward(op, truth);
    SensitivitySet maps0 = estimate_maps_lowfreq(y, mask);

    ParamStore ps;
    init_xpdnet_params(ps, cfg, 0x99);
    randomize_final_convs(ps, 0.02, 0xF17C);

    auto build = [&](Tape& t) {
        XpdnetGraph g = xpdnet_forward_graph(t, ps, cfg, y, mask, maps0);
        return t.scalar_mul(t.mean(t.mul(g.output, g.output)), 0.5);
    };
    return {run_case("network/xpdnet_2iter_16x16_2coil", ps, build, 1e-3)};
}

std::vector<SuiteResult> loss_suite() {
    Rng rng(0x10555);
    Tensor tgt = uniform_tensor(1, 1, 32, 32, rng, 0.2, 0.8);
    Tensor pred0 = tgt;
    for (double& v : pred0.data) v += rng.uniform(-0.05, 0.05);

    ParamStore ps;
    Parameter& pred = ps.create("loss.pred", pred0);
    auto build = [&](Tape& t) {
        return compound_loss_graph(t, t.leaf(pred), t.constant(tgt), 0.5, 0.5, 1.0);
    };
    return {run_case("loss/compound", ps, build, 1e-3)};
}

} // namespace

std::vector<std::string> gradcheck_suite_names() {
    return {"primitives", "mwcnn", "unet", "xpdnet", "loss"};
}

std::vector<SuiteResult> run_gradcheck_suite(const std::string& which) {
    if (which == "primitives") return primitives_suite();
    if (which == "mwcnn") return mwcnn_suite();
    if (which == "unet") return unet_suite();
    if (which == "xpdnet") return xpdnet_suite();
    if (which == "loss") return loss_suite();
    if (which == "all") {
        std::vector<SuiteResult> out;
        for (const std::string& name : gradcheck_suite_names()) {
            std::vector<SuiteResult> part = run_gradcheck_suite(name);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }
    throw InvalidConfigError("unknown gradcheck suite '" + which + "'");
}

} // namespace mri
