#include "mri/networks.hpp"

#include <cmath>
#include <sstream>

#include "mri/sense.hpp"

namespace mri {
namespace {

std::string istr(int i) { return std::to_string(i); }

void create_conv(ParamStore& ps, const std::string& name, int cout, int cin, int k, Rng& rng,
                 bool zero_init) {
    Tensor w(cout, cin, k, k);
    if (!zero_init) w.fill_randn(rng, std::sqrt(2.0 / (static_cast<double>(cin) * k * k)));
    ps.create(name + ".weight", std::move(w));
    ps.create(name + ".bias", Tensor(1, cout, 1, 1));
}

NodeId conv_block(Tape& t, ParamStore& ps, const std::string& name, NodeId x, bool activated) {
    NodeId y = t.conv2d(x, t.leaf(ps.get(name + ".weight")));
    y = t.bias_add(y, t.leaf(ps.get(name + ".bias")));
    return activated ? t.relu(y) : y;
}

} // namespace

// ---------------------------------------------------------------------------
// Configs

void MwcnnConfig::validate() const {
    if (scales < 1) throw InvalidConfigError("mwcnn: scales must be >= 1");
    if (static_cast<int>(filters.size()) != scales)
        throw InvalidConfigError("mwcnn: filters list length must equal scales");
    for (int f : filters)
        if (f < 1) throw InvalidConfigError("mwcnn: filter counts must be positive");
    if (blocks_per_scale < 1) throw InvalidConfigError("mwcnn: blocks_per_scale must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw InvalidConfigError("mwcnn: kernel must be odd");
}

void UnetConfig::validate() const {
    if (depth < 1) throw InvalidConfigError("unet: depth must be >= 1");
    if (base_filters < 1) throw InvalidConfigError("unet: base_filters must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw InvalidConfigError("unet: kernel must be odd");
}

void XpdnetConfig::validate() const {
    if (n_unrolled < 1) throw InvalidConfigError("xpdnet: n_unrolled must be >= 1");
    if (buffer_size < 1) throw InvalidConfigError("xpdnet: buffer_size must be >= 1");
    mwcnn.validate();
    unet.validate();
}

// ---------------------------------------------------------------------------
// Parameter initialization

void init_mwcnn_params(ParamStore& ps, const std::string& prefix, const MwcnnConfig& cfg,
                       int in_channels, int out_channels, Rng& rng) {
    cfg.validate();
    const int k = cfg.kernel;
    for (int s = 0; s < cfg.scales; ++s) {
        const int cin0 = s == 0 ? in_channels : 4 * cfg.filters[s - 1];
        for (int b = 0; b < cfg.blocks_per_scale; ++b)
            create_conv(ps, prefix + "enc" + istr(s) + ".conv" + istr(b), cfg.filters[s],
                        b == 0 ? cin0 : cfg.filters[s], k, rng, false);
    }
    for (int s = cfg.scales - 1; s >= 1; --s) {
        create_conv(ps, prefix + "dec" + istr(s) + ".expand", 4 * cfg.filters[s - 1],
                    cfg.filters[s], k, rng, false);
        for (int b = 0; b < cfg.blocks_per_scale; ++b)
            create_conv(ps, prefix + "dec" + istr(s - 1) + ".conv" + istr(b), cfg.filters[s - 1],
                        cfg.filters[s - 1], k, rng, false);
    }
    create_conv(ps, prefix + "final", out_channels, cfg.filters[0], k, rng, true);
}

void init_unet_params(ParamStore& ps, const std::string& prefix, const UnetConfig& cfg,
                      int in_channels, int out_channels, Rng& rng) {
    cfg.validate();
    const int k = cfg.kernel;
    auto f = [&](int d) { return cfg.base_filters << d; };
    for (int d = 0; d < cfg.depth; ++d) {
        const int cin0 = d == 0 ? in_channels : f(d - 1);
        create_conv(ps, prefix + "enc" + istr(d) + ".conv0", f(d), cin0, k, rng, false);
        create_conv(ps, prefix + "enc" + istr(d) + ".conv1", f(d), f(d), k, rng, false);
    }
    create_conv(ps, prefix + "bottom.conv0", f(cfg.depth), f(cfg.depth - 1), k, rng, false);
    create_conv(ps, prefix + "bottom.conv1", f(cfg.depth), f(cfg.depth), k, rng, false);
    for (int d = cfg.depth - 1; d >= 0; --d) {
        create_conv(ps, prefix + "dec" + istr(d) + ".conv0", f(d), f(d + 1) + f(d), k, rng, false);
        create_conv(ps, prefix + "dec" + istr(d) + ".conv1", f(d), f(d), k, rng, false);
    }
    create_conv(ps, prefix + "final", out_channels, f(0), k, rng, true);
}

void init_xpdnet_params(ParamStore& ps, const XpdnetConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed ^ 0x78706e6574ULL);
    const int cin = 2 * (cfg.buffer_size + 1);
    const int cout = 2 * cfg.buffer_size;
    for (int k = 0; k < cfg.n_unrolled; ++k) {
        ps.create("iter" + istr(k) + ".alpha", Tensor::scalar(cfg.alpha_init));
        init_mwcnn_params(ps, "iter" + istr(k) + ".mwcnn.", cfg.mwcnn, cin, cout, rng);
    }
    if (cfg.refine_maps) init_unet_params(ps, "smaps.", cfg.unet, 2, 2, rng);
}

// ---------------------------------------------------------------------------
// Graph builders

NodeId mwcnn_forward_graph(Tape& t, ParamStore& ps, const std::string& prefix, NodeId x,
                           const MwcnnConfig& cfg, int out_channels) {
    cfg.validate();
    (void)out_channels; // channel count is carried by the final conv weights
    const Tensor& vx = t.value(x);
    const int div = 1 << cfg.scales;
    if (vx.h % div != 0 || vx.w % div != 0)
        throw InvalidInputError("mwcnn: spatial dims must be divisible by 2^scales");

    std::vector<NodeId> skips;
    NodeId h = x;
    for (int s = 0; s < cfg.scales; ++s) {
        if (s > 0) h = t.dwt_layer(h);
        for (int b = 0; b < cfg.blocks_per_scale; ++b)
            h = conv_block(t, ps, prefix + "enc" + istr(s) + ".conv" + istr(b), h, true);
        if (s + 1 < cfg.scales) skips.push_back(h);
    }
    for (int s = cfg.scales - 1; s >= 1; --s) {
        h = conv_block(t, ps, prefix + "dec" + istr(s) + ".expand", h, true);
        h = t.idwt_layer(h);
        h = t.add(h, skips[static_cast<size_t>(s - 1)]);
        for (int b = 0; b < cfg.blocks_per_scale; ++b)
            h = conv_block(t, ps, prefix + "dec" + istr(s - 1) + ".conv" + istr(b), h, true);
    }
    return conv_block(t, ps, prefix + "final", h, false);
}

NodeId unet_forward_graph(Tape& t, ParamStore& ps, const std::string& prefix, NodeId x,
                          const UnetConfig& cfg, int out_channels) {
    cfg.validate();
    (void)out_channels;
    const Tensor& vx = t.value(x);
    const int div = 1 << cfg.depth;
    if (vx.h % div != 0 || vx.w % div != 0)
        throw InvalidInputError("unet: spatial dims must be divisible by 2^depth");

    std::vector<NodeId> skips;
    NodeId h = x;
    for (int d = 0; d < cfg.depth; ++d) {
        h = conv_block(t, ps, prefix + "enc" + istr(d) + ".conv0", h, true);
        h = conv_block(t, ps, prefix + "enc" + istr(d) + ".conv1", h, true);
        skips.push_back(h);
        h = t.avgpool2(h);
    }
    h = conv_block(t, ps, prefix + "bottom.conv0", h, true);
    h = conv_block(t, ps, prefix + "bottom.conv1", h, true);
    for (int d = cfg.depth - 1; d >= 0; --d) {
        h = t.nearest_upsample2(h);
        h = t.concat({h, skips[static_cast<size_t>(d)]});
        h = conv_block(t, ps, prefix + "dec" + istr(d) + ".conv0", h, true);
        h = conv_block(t, ps, prefix + "dec" + istr(d) + ".conv1", h, true);
    }
    return conv_block(t, ps, prefix + "final", h, false);
}

NodeId refine_maps_graph(Tape& t, ParamStore& ps, const std::string& prefix, NodeId maps0,
                         const std::vector<uint8_t>& support, const UnetConfig& cfg) {
    NodeId delta = unet_forward_graph(t, ps, prefix, maps0, cfg, 2);
    return t.renorm_maps(t.add(maps0, delta), support);
}

XpdnetGraph xpdnet_forward_graph(Tape& t, ParamStore& ps, const XpdnetConfig& cfg,
                                 const CoilKSpace& y, const SamplingMask& mask,
                                 const SensitivitySet& maps, const Tensor* buffer_tail) {
    cfg.validate();
    if (y.height != mask.height || y.width != mask.width)
        throw InvalidInputError("xpdnet: k-space and mask shapes disagree");
    if (maps.coils != y.coils || maps.height != y.height || maps.width != y.width)
        throw InvalidInputError("xpdnet: maps and k-space shapes disagree");
    const int div = 1 << cfg.mwcnn.scales;
    if (y.height % div != 0 || y.width % div != 0)
        throw InvalidInputError("xpdnet: spatial dims must be divisible by 2^scales");

    const int L = y.coils;
    NodeId y_node = t.constant(tensor_from_coils(y), Domain::kspace);
    NodeId maps_node = t.constant(tensor_from_maps(maps), Domain::image);
    if (cfg.refine_maps)
        maps_node = refine_maps_graph(t, ps, "smaps.", maps_node, map_support(maps), cfg.unet);
    NodeId maps_conj = t.conj(maps_node);

    auto adjoint = [&](NodeId k) {
        NodeId km = t.mask_rows(k, mask);
        NodeId img = t.ifftc(km);
        return t.sum_coils(t.cmul(maps_conj, img));
    };

    NodeId x0 = adjoint(y_node);
    NodeId buffer;
    if (buffer_tail) {
        const Tensor& bt = *buffer_tail;
        if (bt.n != 1 || bt.c != 2 * (cfg.buffer_size - 1) || bt.h != y.height || bt.w != y.width)
            throw InvalidInputError("xpdnet: buffer_tail shape mismatch");
        buffer = t.concat({x0, t.constant(bt, Domain::image)});
    } else {
        std::vector<NodeId> parts(static_cast<size_t>(cfg.buffer_size), x0);
        buffer = cfg.buffer_size == 1 ? x0 : t.concat(parts);
    }

    for (int k = 0; k < cfg.n_unrolled; ++k) {
        NodeId b0 = t.slice(buffer, 0, 2);
        NodeId eb = t.mask_rows(t.fftc(t.cmul(maps_node, t.broadcast_coils(b0, L))), mask);
        NodeId r = adjoint(t.sub(eb, y_node));
        r = t.scalar_param_mul(r, t.leaf(ps.get("iter" + istr(k) + ".alpha")));
        NodeId net_in = t.concat({buffer, r});
        NodeId update = mwcnn_forward_graph(t, ps, "iter" + istr(k) + ".mwcnn.", net_in, cfg.mwcnn,
                                            2 * cfg.buffer_size);
        buffer = t.add(buffer, update);
    }
    return {t.slice(buffer, 0, 2), maps_node};
}

// ---------------------------------------------------------------------------
// Eager wrappers

ComplexImage xpdnet_forward(const CoilKSpace& y, const SamplingMask& mask,
                            const SensitivitySet& maps, const XpdnetConfig& cfg, ParamStore& ps) {
    Tape t;
    XpdnetGraph g = xpdnet_forward_graph(t, ps, cfg, y, mask, maps);
    return image_from_tensor(t.value(g.output));
}

SensitivitySet unet_refine_maps(const SensitivitySet& maps0, const UnetConfig& cfg, ParamStore& ps) {
    Tape t;
    NodeId m0 = t.constant(tensor_from_maps(maps0), Domain::image);
    NodeId refined = refine_maps_graph(t, ps, "smaps.", m0, map_support(maps0), cfg);
    return maps_from_tensor(t.value(refined));
}

// ---------------------------------------------------------------------------
// Architecture serialization

std::map<std::string, std::string> encode_arch(const XpdnetConfig& cfg) {
    std::map<std::string, std::string> m;
    m["n_unrolled"] = istr(cfg.n_unrolled);
    m["buffer_size"] = istr(cfg.buffer_size);
    m["refine_maps"] = cfg.refine_maps ? "1" : "0";
    {
        std::ostringstream os;
        os.precision(17);
        os << cfg.alpha_init;
        m["alpha_init"] = os.str();
    }
    m["mwcnn.scales"] = istr(cfg.mwcnn.scales);
    {
        std::string f;
        for (size_t i = 0; i < cfg.mwcnn.filters.size(); ++i) {
            if (i) f += ',';
            f += istr(cfg.mwcnn.filters[i]);
        }
        m["mwcnn.filters"] = f;
    }
    m["mwcnn.blocks"] = istr(cfg.mwcnn.blocks_per_scale);
    m["mwcnn.kernel"] = istr(cfg.mwcnn.kernel);
    m["unet.depth"] = istr(cfg.unet.depth);
    m["unet.base_filters"] = istr(cfg.unet.base_filters);
    m["unet.kernel"] = istr(cfg.unet.kernel);
    return m;
}

namespace {

int arch_int(const std::string& key, const std::string& text) {
    try {
        size_t used = 0;
        int v = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InvalidConfigError("arch: bad integer for " + key + ": '" + text + "'");
    }
}

double arch_double(const std::string& key, const std::string& text) {
    try {
        size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InvalidConfigError("arch: bad number for " + key + ": '" + text + "'");
    }
}

} // namespace

XpdnetConfig decode_arch(const std::map<std::string, std::string>& arch) {
    XpdnetConfig cfg;
    auto geti = [&](const char* key, int& out) {
        auto it = arch.find(key);
        if (it != arch.end()) out = arch_int(key, it->second);
    };
    geti("n_unrolled", cfg.n_unrolled);
    geti("buffer_size", cfg.buffer_size);
    if (auto it = arch.find("refine_maps"); it != arch.end()) cfg.refine_maps = it->second != "0";
    if (auto it = arch.find("alpha_init"); it != arch.end())
        cfg.alpha_init = arch_double("alpha_init", it->second);
    geti("mwcnn.scales", cfg.mwcnn.scales);
    if (auto it = arch.find("mwcnn.filters"); it != arch.end()) {
        cfg.mwcnn.filters.clear();
        const std::string& s = it->second;
        size_t pos = 0;
        while (pos < s.size()) {
            size_t comma = s.find(',', pos);
            if (comma == std::string::npos) comma = s.size();
            cfg.mwcnn.filters.push_back(arch_int("mwcnn.filters", s.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    geti("mwcnn.blocks", cfg.mwcnn.blocks_per_scale);
    geti("mwcnn.kernel", cfg.mwcnn.kernel);
    geti("unet.depth", cfg.unet.depth);
    geti("unet.base_filters", cfg.unet.base_filters);
    geti("unet.kernel", cfg.unet.kernel);
    cfg.validate();
    return cfg;
}

} // namespace mri
