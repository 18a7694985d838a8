#include "mri/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mri/errors.hpp"
#include "mri/kspace.hpp"
#include "mri/loss_graph.hpp"
#include "mri/optim.hpp"
#include "mri/rng.hpp"
#include "mri/sense.hpp"

namespace mri {

// ------------------------------------------------------------ configuration

void DatasetConfig::validate() const {
    if (n_slices <= 0) throw InvalidConfigError("data.n_slices must be positive");
    if (image_size < 16) throw InvalidConfigError("data.image_size must be at least 16");
    if (coils < 1) throw InvalidConfigError("data.coils must be at least 1");
    if (noise_sigma < 0.0) throw InvalidConfigError("data.noise_sigma must be non-negative");
}

void TrainConfig::validate() const {
    data.validate();
    model.validate();
    if (epochs < 0 || fine_tune_epochs < 0) {
        throw InvalidConfigError("epoch counts must be non-negative");
    }
    if (epochs + fine_tune_epochs == 0) {
        throw InvalidConfigError("at least one training epoch is required");
    }
    if (fine_tune_epochs > 0 && (fine_tune_contrast < 0 || fine_tune_contrast > 3)) {
        throw InvalidConfigError("fine_tune_contrast must be 0..3 when fine-tuning");
    }
    if (accel < 1) throw InvalidConfigError("accel must be at least 1");
    if (acs < 0 || acs > data.image_size) {
        throw InvalidConfigError("acs must lie in [0, image_size]");
    }
    if (lr <= 0.0) throw InvalidConfigError("lr must be positive");
    if (loss_alpha < 0.0 || loss_beta < 0.0 || loss_alpha + loss_beta <= 0.0) {
        throw InvalidConfigError("loss weights must be non-negative and not both zero");
    }
    if (clip_norm < 0.0) throw InvalidConfigError("clip_norm must be non-negative");
    if (max_steps < 0) throw InvalidConfigError("max_steps must be non-negative");
    if (checkpoint_every < 0) throw InvalidConfigError("checkpoint_every must be non-negative");

    int mw_div = 1 << model.mwcnn.scales;
    if (data.image_size % mw_div != 0) {
        throw InvalidConfigError("image_size must be divisible by 2^mwcnn.scales = " +
                                 std::to_string(mw_div));
    }
    if (model.refine_maps) {
        int un_div = 1 << model.unet.depth;
        if (data.image_size % un_div != 0) {
            throw InvalidConfigError("image_size must be divisible by 2^unet.depth = " +
                                     std::to_string(un_div));
        }
    }
}

Contrast synthetic_contrast(int slice_index) {
    switch (((slice_index % 4) + 4) % 4) {
        case 0: return Contrast::t1;
        case 1: return Contrast::t2;
        case 2: return Contrast::flair;
        default: return Contrast::t1post;
    }
}

// ----------------------------------------------------------------- sampling

TrainSample make_train_sample(const DatasetConfig& data, int index, int accel, int acs,
                              uint64_t seed) {
    TrainSample s;
    s.contrast = synthetic_contrast(index);
    s.truth = make_phantom_variant(data.image_size, static_cast<uint64_t>(index),
                                   data.smooth_phase);

    SensitivitySet true_maps = make_coil_maps(data.image_size, data.coils);
    s.mask = make_mask(data.image_size, data.image_size, accel, acs, index % accel);
    ForwardOperator op;
    op.mask = s.mask;
    op.maps = true_maps;
    s.y = apply_forward(op, s.truth);

    if (data.noise_sigma > 0.0) {
        Rng rng(seed ^ (0x6E6F697365ULL + static_cast<uint64_t>(index) * 0x9E3779B9ULL));
        for (int l = 0; l < s.y.coils; ++l) {
            for (int r = 0; r < s.y.height; ++r) {
                if (!s.mask.selected(r)) continue;
                for (int c = 0; c < s.y.width; ++c) {
                    s.y.at(l, r, c) += cplx(data.noise_sigma * rng.normal(),
                                            data.noise_sigma * rng.normal());
                }
            }
        }
    }

    s.maps = estimate_maps_lowfreq(s.y, s.mask);

    s.target = RealImage(data.image_size, data.image_size);
    s.tmax = 0.0;
    for (size_t i = 0; i < s.truth.data.size(); ++i) {
        s.target.data[i] = std::abs(s.truth.data[i]);
        s.tmax = std::max(s.tmax, s.target.data[i]);
    }
    if (!(s.tmax > 0.0)) {
        throw NumericError("training slice " + std::to_string(index) + " is all zero");
    }
    for (double& v : s.target.data) v /= s.tmax;
    return s;
}

// --------------------------------------------------------------- checkpoint

Checkpoint snapshot_checkpoint(const ParamStore& ps, const TrainConfig& cfg,
                               const Radam* opt) {
    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        return os.str();
    };
    std::map<std::string, std::string> arch = encode_arch(cfg.model);
    arch["train.seed"] = std::to_string(cfg.seed);
    arch["train.accel"] = std::to_string(cfg.accel);
    arch["train.acs"] = std::to_string(cfg.acs);
    arch["train.epochs"] = std::to_string(cfg.epochs);
    arch["train.fine_tune_epochs"] = std::to_string(cfg.fine_tune_epochs);
    arch["train.lr"] = fmt(cfg.lr);
    arch["data.n_slices"] = std::to_string(cfg.data.n_slices);
    arch["data.image_size"] = std::to_string(cfg.data.image_size);
    arch["data.coils"] = std::to_string(cfg.data.coils);

    Checkpoint ck = make_checkpoint(ps, arch);
    if (opt != nullptr) {
        Tensor t_step(1, 1, 1, 1);
        t_step.data[0] = static_cast<double>(opt->steps_taken());
        ck.opt_state.push_back({"t", t_step});
        for (const Parameter* p : ps.all()) {
            ck.opt_state.push_back({"m." + p->name, opt->first_moment(p->name)});
            ck.opt_state.push_back({"v." + p->name, opt->second_moment(p->name)});
        }
    }
    return ck;
}

// ------------------------------------------------------------- training loop

TrainReport train(const TrainConfig& cfg, ParamStore& ps) {
    cfg.validate();
    if (ps.size() != 0) throw InvalidInputError("train expects an empty parameter store");

    const int acs = cfg.acs > 0 ? cfg.acs : default_acs_count(cfg.data.image_size, cfg.accel);

    std::vector<TrainSample> samples;
    samples.reserve(static_cast<size_t>(cfg.data.n_slices));
    for (int i = 0; i < cfg.data.n_slices; ++i) {
        samples.push_back(make_train_sample(cfg.data, i, cfg.accel, acs, cfg.seed));
    }

    init_xpdnet_params(ps, cfg.model, cfg.seed);

    RadamConfig oc;
    oc.lr = cfg.lr;
    oc.clip_norm = cfg.clip_norm;
    Radam opt(ps, oc);

    TrainReport report;
    const int total_epochs = cfg.epochs + cfg.fine_tune_epochs;
    int step = 0;
    bool done = false;

    for (int epoch = 0; epoch < total_epochs && !done; ++epoch) {
        const bool fine_tuning = epoch >= cfg.epochs;

        std::vector<int> order;
        for (int i = 0; i < cfg.data.n_slices; ++i) {
            if (fine_tuning &&
                synthetic_contrast(i) != static_cast<Contrast>(cfg.fine_tune_contrast)) {
                continue;
            }
            order.push_back(i);
        }
        if (order.empty()) continue;
        Rng shuffle_rng(cfg.seed ^ (0xE50CULL + static_cast<uint64_t>(epoch)));
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = shuffle_rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }

        for (int idx : order) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                done = true;
                break;
            }
            const TrainSample& s = samples[static_cast<size_t>(idx)];
            ++step;

            ps.zero_grads();
            Tape t;
            XpdnetGraph g = xpdnet_forward_graph(t, ps, cfg.model, s.y, s.mask, s.maps);
            NodeId mag = t.cmag(g.output);
            NodeId pred = t.scalar_mul(mag, 1.0 / s.tmax);
            NodeId target = t.constant(tensor_from_real(s.target));
            NodeId l1 = l1_loss_graph(t, pred, target);
            NodeId ms = msssim_graph(t, pred, target, /*data_range=*/1.0);
            NodeId one_minus_ms = t.add_scalar(t.scalar_mul(ms, -1.0), 1.0);
            NodeId loss = t.add(t.scalar_mul(l1, cfg.loss_alpha),
                                t.scalar_mul(one_minus_ms, cfg.loss_beta));

            const double loss_v = t.value(loss).data[0];
            if (!std::isfinite(loss_v)) {
                throw NumericError("training loss became non-finite at step " +
                                   std::to_string(step));
            }

            t.backward(loss);
            RadamStepInfo info = opt.step();
            if (info.rejected) ++report.rejected_steps;

            LossRow row;
            row.step = step;
            row.epoch = epoch;
            row.loss = loss_v;
            row.l1_term = cfg.loss_alpha * t.value(l1).data[0];
            row.msssim_term = cfg.loss_beta * t.value(one_minus_ms).data[0];
            report.history.push_back(row);
            report.visited.push_back({step, epoch, idx, s.contrast});

            if (!cfg.ckpt_path.empty() && cfg.checkpoint_every > 0 &&
                step % cfg.checkpoint_every == 0) {
                write_checkpoint(cfg.ckpt_path + ".step" + std::to_string(step),
                                 snapshot_checkpoint(ps, cfg, &opt));
            }
        }
    }

    report.steps = step;
    if (!report.history.empty()) {
        int w = std::min<int>(20, std::max<int>(1, step / 10));
        w = std::min<int>(w, static_cast<int>(report.history.size()));
        report.smoothing_window = w;
        double first = 0.0, last = 0.0;
        for (int i = 0; i < w; ++i) {
            first += report.history[static_cast<size_t>(i)].loss;
            last += report.history[report.history.size() - 1 - static_cast<size_t>(i)].loss;
        }
        report.initial_smoothed = first / w;
        report.final_smoothed = last / w;
    }

    if (!cfg.ckpt_path.empty()) {
        write_checkpoint(cfg.ckpt_path, snapshot_checkpoint(ps, cfg, &opt));
    }
    if (!cfg.loss_csv_path.empty()) {
        write_loss_csv(cfg.loss_csv_path, report.history);
    }
    return report;
}

// --------------------------------------------------------------------- CSV

void write_loss_csv(const std::string& path, const std::vector<LossRow>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataFormatError(DataFormatError::Kind::truncated,
                                    path + ": cannot open for writing");
    out << "step,epoch,loss,l1_term,msssim_term\n";
    out.precision(10);
    for (const LossRow& r : history) {
        out << r.step << "," << r.epoch << "," << r.loss << "," << r.l1_term << ","
            << r.msssim_term << "\n";
    }
    if (!out) throw DataFormatError(DataFormatError::Kind::truncated,
                                    path + ": write failed");
}

// ------------------------------------------------------------ config parsing

namespace {

int to_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw InvalidConfigError("config key '" + key + "': invalid integer '" + value + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return static_cast<uint64_t>(v);
    } catch (const std::exception&) {
        throw InvalidConfigError("config key '" + key + "': invalid integer '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw InvalidConfigError("config key '" + key + "': invalid number '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw InvalidConfigError("config key '" + key + "': expected 0/1/true/false, got '" +
                             value + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos <= value.size()) {
        size_t comma = value.find(',', pos);
        if (comma == std::string::npos) comma = value.size();
        out.push_back(to_int(key, value.substr(pos, comma - pos)));
        pos = comma + 1;
        if (comma == value.size()) break;
    }
    return out;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "epochs") cfg.epochs = to_int(key, value);
    else if (key == "fine_tune_epochs") cfg.fine_tune_epochs = to_int(key, value);
    else if (key == "fine_tune_contrast") {
        if (value == "t1" || value == "t2" || value == "flair" || value == "t1post") {
            cfg.fine_tune_contrast = static_cast<int>(contrast_from_string(value));
        } else {
            cfg.fine_tune_contrast = to_int(key, value);
        }
    }
    else if (key == "accel") cfg.accel = to_int(key, value);
    else if (key == "acs") cfg.acs = to_int(key, value);
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "max_steps") cfg.max_steps = to_int(key, value);
    else if (key == "lr") cfg.lr = to_double(key, value);
    else if (key == "loss_alpha") cfg.loss_alpha = to_double(key, value);
    else if (key == "loss_beta") cfg.loss_beta = to_double(key, value);
    else if (key == "clip_norm") cfg.clip_norm = to_double(key, value);
    else if (key == "checkpoint_every") cfg.checkpoint_every = to_int(key, value);
    else if (key == "loss_csv") cfg.loss_csv_path = value;
    else if (key == "data.n_slices") cfg.data.n_slices = to_int(key, value);
    else if (key == "data.image_size") cfg.data.image_size = to_int(key, value);
    else if (key == "data.coils") cfg.data.coils = to_int(key, value);
    else if (key == "data.noise_sigma") cfg.data.noise_sigma = to_double(key, value);
    else if (key == "data.smooth_phase") cfg.data.smooth_phase = to_bool(key, value);
    else if (key == "model.n_unrolled") cfg.model.n_unrolled = to_int(key, value);
    else if (key == "model.buffer_size") cfg.model.buffer_size = to_int(key, value);
    else if (key == "model.refine_maps") cfg.model.refine_maps = to_bool(key, value);
    else if (key == "model.alpha_init") cfg.model.alpha_init = to_double(key, value);
    else if (key == "model.mwcnn.scales") cfg.model.mwcnn.scales = to_int(key, value);
    else if (key == "model.mwcnn.filters") cfg.model.mwcnn.filters = to_int_list(key, value);
    else if (key == "model.mwcnn.blocks") cfg.model.mwcnn.blocks_per_scale = to_int(key, value);
    else if (key == "model.mwcnn.kernel") cfg.model.mwcnn.kernel = to_int(key, value);
    else if (key == "model.unet.depth") cfg.model.unet.depth = to_int(key, value);
    else if (key == "model.unet.base_filters") cfg.model.unet.base_filters = to_int(key, value);
    else if (key == "model.unet.kernel") cfg.model.unet.kernel = to_int(key, value);
    else throw InvalidConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfigError(path + ": cannot open config file");
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw InvalidConfigError(path + ":" + std::to_string(lineno) +
                                     ": expected key=value, got '" + line + "'");
        }
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

} // namespace mri
