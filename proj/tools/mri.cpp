#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mri/data_io.hpp"
#include "mri/errors.hpp"
#include "mri/gradcheck_suites.hpp"
#include "mri/kspace.hpp"
#include "mri/metrics.hpp"
#include "mri/networks.hpp"
#include "mri/optim.hpp"
#include "mri/pdhg.hpp"
#include "mri/rng.hpp"
#include "mri/sense.hpp"
#include "mri/train.hpp"
#include "mri/types.hpp"
#include "mri/wavelets.hpp"

namespace {

using namespace mri;

// ------------------------------------------------------------------ helpers

ComplexImage load_image_slice(const std::string& path, int slice) {
    KspVolume vol = read_ksp(path);
    if (vol.coils != 1) {
        throw InvalidInputError(path + ": expected a single-coil image container, has " +
                                std::to_string(vol.coils) + " coils");
    }
    CoilKSpace k = vol.slice(slice);
    ComplexImage img(k.height, k.width);
    img.data.assign(k.data.begin(), k.data.end());
    return img;
}

CoilKSpace load_kspace_slice(const std::string& path, int slice, Contrast* contrast = nullptr) {
    KspVolume vol = read_ksp(path);
    if (contrast != nullptr) *contrast = vol.contrast;
    return vol.slice(slice);
}

void write_image(const std::string& path, const ComplexImage& img, Contrast contrast) {
    KspVolume vol = KspVolume::from_image(img);
    vol.contrast = contrast;
    write_ksp(path, vol);
}

void maybe_write_pgm(const std::string& pgm_path, const ComplexImage& img) {
    if (!pgm_path.empty()) write_pgm16(pgm_path, magnitude(img));
}

SensitivitySet resolve_maps(const std::string& maps_path, const CoilKSpace& y,
                            const SamplingMask& mask) {
    if (!maps_path.empty()) {
        SensitivitySet maps = read_maps(maps_path);
        if (maps.coils != y.coils || maps.height != y.height || maps.width != y.width) {
            throw InvalidInputError("sensitivity maps shape does not match the k-space data");
        }
        return maps;
    }
    return estimate_maps_lowfreq(y, mask);
}

WaveletFamily family_from_string(const std::string& name) {
    if (name == "haar") return WaveletFamily::haar;
    if (name == "db2") return WaveletFamily::db2;
    throw InvalidConfigError("unknown wavelet family '" + name + "' (use haar or db2)");
}

// Magnitude image from either a KSP1 image container or a 16-bit PGM,
// detected by magic bytes.
RealImage load_magnitude_any(const std::string& path, int slice, bool& was_pgm) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": cannot open for reading");
    }
    char m[4] = {0, 0, 0, 0};
    probe.read(m, 4);
    probe.close();
    if (m[0] == 'P' && m[1] == '5') {
        was_pgm = true;
        return read_pgm16(path);
    }
    was_pgm = false;
    return magnitude(load_image_slice(path, slice));
}

void normalize_by_max(RealImage& img) {
    double mx = 0.0;
    for (double v : img.data) mx = std::max(mx, v);
    if (mx > 0.0) {
        for (double& v : img.data) v /= mx;
    }
}

// --------------------------------------------------------------- subcommands

struct PhantomArgs {
    int size = 64;
    uint64_t variant = 0;
    bool smooth_phase = false;
    std::string out, pgm;
};

void cmd_phantom(const PhantomArgs& a) {
    ComplexImage img = a.variant == 0 ? make_phantom(a.size, a.smooth_phase)
                                      : make_phantom_variant(a.size, a.variant, a.smooth_phase);
    write_image(a.out, img, Contrast::synthetic);
    maybe_write_pgm(a.pgm, img);
    std::cout << "wrote " << a.size << "x" << a.size << " phantom to " << a.out << "\n";
}

struct MaskArgs {
    int height = 0, width = 0, accel = 0, acs = 0, offset = 0;
    std::string out;
};

void cmd_mask(const MaskArgs& a) {
    int width = a.width > 0 ? a.width : a.height;
    int acs = a.acs > 0 ? a.acs : default_acs_count(a.height, a.accel);
    SamplingMask mask = make_mask(a.height, width, a.accel, acs, a.offset);
    write_mask(a.out, mask);
    std::cout << "wrote mask (" << mask.selected_count() << "/" << mask.height
              << " lines, acs " << mask.acs_count << ") to " << a.out << "\n";
}

struct SimArgs {
    std::string image, mask, out, maps_out;
    int coils = 4;
    double noise_sigma = 0.0;
    uint64_t seed = 0;
    int slice = 0;
};

void cmd_sim(const SimArgs& a) {
    ComplexImage x = load_image_slice(a.image, a.slice);
    if (x.height != x.width) {
        throw InvalidInputError("sim: the coil model expects a square image");
    }
    SamplingMask mask = read_mask(a.mask);
    if (mask.height != x.height || mask.width != x.width) {
        throw InvalidInputError("sim: mask shape does not match the image");
    }
    SensitivitySet maps = make_coil_maps(x.height, a.coils);
    ForwardOperator op;
    op.mask = mask;
    op.maps = maps;
    CoilKSpace y = apply_forward(op, x);
    if (a.noise_sigma > 0.0) {
        Rng rng(a.seed);
        for (int l = 0; l < y.coils; ++l) {
            for (int r = 0; r < y.height; ++r) {
                if (!mask.selected(r)) continue;
                for (int c = 0; c < y.width; ++c) {
                    y.at(l, r, c) += cplx(a.noise_sigma * rng.normal(),
                                          a.noise_sigma * rng.normal());
                }
            }
        }
    }
    KspVolume vol = KspVolume::from_coils(y);
    vol.contrast = Contrast::synthetic;
    write_ksp(a.out, vol);
    if (!a.maps_out.empty()) write_maps(a.maps_out, maps);
    std::cout << "wrote " << a.coils << "-coil undersampled k-space to " << a.out << "\n";
}

struct MapsArgs {
    std::string kspace, mask, out;
    int slice = 0;
    bool no_apodize = false;
};

void cmd_maps(const MapsArgs& a) {
    CoilKSpace y = load_kspace_slice(a.kspace, a.slice);
    SamplingMask mask = read_mask(a.mask);
    SensitivitySet maps = estimate_maps_lowfreq(y, mask, !a.no_apodize);
    write_maps(a.out, maps);
    std::cout << "wrote " << maps.coils << "-coil sensitivity maps to " << a.out << "\n";
}

struct ReconArgs {
    std::string kspace, mask, maps, out, pgm, ckpt, trace;
    double lambda = 1e-2;
    int iters = 200;
    int levels = 3;
    std::string family = "db2";
    int slice = 0;
};

void cmd_recon_zf(const ReconArgs& a) {
    Contrast contrast = Contrast::synthetic;
    CoilKSpace y = load_kspace_slice(a.kspace, a.slice, &contrast);
    SamplingMask mask = read_mask(a.mask);
    ForwardOperator op;
    op.mask = mask;
    op.maps = SensitivitySet(y.coils, y.height, y.width);
    double u = 1.0 / std::sqrt(static_cast<double>(y.coils));
    for (cplx& s : op.maps.data) s = cplx(u, 0.0); // uniform maps; zf uses only the mask
    RealImage r = zero_filled(y, op);
    ComplexImage img(r.height, r.width);
    for (size_t i = 0; i < r.data.size(); ++i) img.data[i] = cplx(r.data[i], 0.0);
    write_image(a.out, img, contrast);
    maybe_write_pgm(a.pgm, img);
    std::cout << "wrote zero-filled reconstruction to " << a.out << "\n";
}

void cmd_recon_pdhg(const ReconArgs& a) {
    Contrast contrast = Contrast::synthetic;
    CoilKSpace y = load_kspace_slice(a.kspace, a.slice, &contrast);
    SamplingMask mask = read_mask(a.mask);
    ForwardOperator op;
    op.mask = mask;
    op.maps = resolve_maps(a.maps, y, mask);
    PdhgConfig cfg;
    cfg.lambda = a.lambda;
    cfg.n_iter = a.iters;
    cfg.levels = a.levels;
    cfg.family = family_from_string(a.family);
    PdhgResult res = solve_cs(y, op, cfg);
    write_image(a.out, res.x, contrast);
    maybe_write_pgm(a.pgm, res.x);
    if (!a.trace.empty()) write_trace_csv(a.trace, res.trace);
    std::cout << "wrote pdhg reconstruction (" << a.iters << " iters, lambda " << a.lambda
              << ") to " << a.out << "\n";
}

void cmd_recon_xpdnet(const ReconArgs& a) {
    Contrast contrast = Contrast::synthetic;
    CoilKSpace y = load_kspace_slice(a.kspace, a.slice, &contrast);
    SamplingMask mask = read_mask(a.mask);
    SensitivitySet maps = resolve_maps(a.maps, y, mask);

    XpdnetConfig cfg;
    ParamStore ps;
    if (!a.ckpt.empty()) {
        Checkpoint ck = read_checkpoint(a.ckpt);
        cfg = decode_arch(ck.arch);
        load_into_store(ck, ps);
    } else {
        init_xpdnet_params(ps, cfg, 0);
    }
    ComplexImage x = xpdnet_forward(y, mask, maps, cfg, ps);
    write_image(a.out, x, contrast);
    maybe_write_pgm(a.pgm, x);
    std::cout << "wrote xpdnet reconstruction (" << cfg.n_unrolled << " unrolled iters"
              << (a.ckpt.empty() ? ", untrained init" : "") << ") to " << a.out << "\n";
}

struct TrainArgs {
    std::string config, out_ckpt, loss_csv;
    std::vector<std::string> overrides;
};

void cmd_train(const TrainArgs& a) {
    TrainConfig cfg = parse_train_config(a.config);
    for (const std::string& kv : a.overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw InvalidConfigError("--set expects key=value, got '" + kv + "'");
        }
        apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!a.out_ckpt.empty()) cfg.ckpt_path = a.out_ckpt;
    if (!a.loss_csv.empty()) cfg.loss_csv_path = a.loss_csv;

    ParamStore ps;
    TrainReport report = train(cfg, ps);
    std::cout << "trained " << report.steps << " steps (" << report.rejected_steps
              << " rejected)\n";
    std::cout << "smoothed loss (window " << report.smoothing_window
              << "): " << report.initial_smoothed << " -> " << report.final_smoothed << "\n";
    if (!cfg.ckpt_path.empty()) std::cout << "checkpoint: " << cfg.ckpt_path << "\n";
}

struct EvalArgs {
    std::string recon, target, out_csv;
    std::string method = "unknown", volume_id = "vol0";
    int accel = 0;
    int slice = 0;
};

void cmd_eval(const EvalArgs& a) {
    bool recon_pgm = false, target_pgm = false;
    RealImage r = load_magnitude_any(a.recon, a.slice, recon_pgm);
    RealImage t = load_magnitude_any(a.target, a.slice, target_pgm);
    if (r.height != t.height || r.width != t.width) {
        throw InvalidInputError("eval: reconstruction and target shapes disagree");
    }
    if (recon_pgm || target_pgm) {
        // PGM files lose absolute scale; compare shapes of the two images.
        normalize_by_max(r);
        normalize_by_max(t);
    } else {
        double tmax = 0.0;
        for (double v : t.data) tmax = std::max(tmax, v);
        if (tmax <= 0.0) throw InvalidInputError("eval: target image is all zero");
        for (double& v : r.data) v /= tmax;
        for (double& v : t.data) v /= tmax;
    }

    MetricsRow row;
    row.volume_id = a.volume_id;
    row.slice = a.slice;
    row.method = a.method;
    row.accel = a.accel;
    row.psnr_db = psnr_capped(r, t, 1.0);
    row.ssim = ssim(r, t, 1.0);
    row.ms_ssim = ms_ssim(r, t, 1.0);

    std::cout << "psnr_db=" << row.psnr_db << " ssim=" << row.ssim
              << " ms_ssim=" << row.ms_ssim << "\n";

    if (!a.out_csv.empty()) {
        bool need_header = true;
        if (std::filesystem::exists(a.out_csv) &&
            std::filesystem::file_size(a.out_csv) > 0) {
            need_header = false;
        }
        std::ofstream out(a.out_csv, std::ios::app);
        if (!out) {
            throw DataFormatError(DataFormatError::Kind::truncated,
                                  a.out_csv + ": cannot open for writing");
        }
        out.precision(10);
        if (need_header) out << "volume_id,slice,method,accel,psnr_db,ssim,ms_ssim\n";
        out << row.volume_id << "," << row.slice << "," << row.method << "," << row.accel
            << "," << row.psnr_db << "," << row.ssim << "," << row.ms_ssim << "\n";
    }
}

int cmd_gradcheck(const std::string& module) {
    std::string which = module.empty() ? "all" : module;
    if (which == "conv") which = "primitives";
    std::vector<SuiteResult> results = run_gradcheck_suite(which);
    bool all_pass = true;
    for (const SuiteResult& r : results) {
        std::printf("%-40s max_rel_err=%.3e checked=%d tol=%.0e %s\n", r.name.c_str(),
                    r.report.max_rel_err, r.report.checked, r.tolerance,
                    r.pass ? "PASS" : "FAIL");
        if (!r.pass) {
            std::printf("  worst coordinate: %s\n", r.report.worst.c_str());
            all_pass = false;
        }
    }
    std::printf("gradcheck %s\n", all_pass ? "PASS" : "FAIL");
    return all_pass ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cartesian multi-coil MRI reconstruction toolkit"};
    app.require_subcommand(1);

    PhantomArgs pa;
    CLI::App* phantom = app.add_subcommand("phantom", "Generate a synthetic test image");
    phantom->add_option("--size", pa.size, "Image size (pixels per side)")->required();
    phantom->add_option("--variant", pa.variant, "Deterministic shape-jitter variant (0 = canonical)");
    phantom->add_flag("--smooth-phase", pa.smooth_phase, "Add a smooth phase ramp");
    phantom->add_option("--out", pa.out, "Output image file")->required();
    phantom->add_option("--pgm", pa.pgm, "Also write a 16-bit PGM preview");

    MaskArgs ma;
    CLI::App* mask = app.add_subcommand("mask", "Generate an equispaced sampling mask");
    mask->add_option("--height", ma.height, "Number of phase-encode lines")->required();
    mask->add_option("--width", ma.width, "Readout width (default: height)");
    mask->add_option("--accel", ma.accel, "Acceleration factor")->required();
    mask->add_option("--acs", ma.acs, "Fully sampled center lines (default: derived)");
    mask->add_option("--offset", ma.offset, "First sampled line offset");
    mask->add_option("--out", ma.out, "Output mask file")->required();

    SimArgs sa;
    CLI::App* sim = app.add_subcommand("sim", "Simulate undersampled multi-coil k-space");
    sim->add_option("--image", sa.image, "Ground-truth image file")->required();
    sim->add_option("--coils", sa.coils, "Number of receive coils");
    sim->add_option("--mask", sa.mask, "Sampling mask file")->required();
    sim->add_option("--noise-sigma", sa.noise_sigma, "Complex noise std dev");
    sim->add_option("--seed", sa.seed, "Noise seed");
    sim->add_option("--slice", sa.slice, "Slice index in the input volume");
    sim->add_option("--out", sa.out, "Output k-space file")->required();
    sim->add_option("--maps-out", sa.maps_out, "Also write the true coil maps");

    MapsArgs mpa;
    CLI::App* maps = app.add_subcommand("maps", "Estimate coil sensitivity maps from ACS lines");
    maps->add_option("--kspace", mpa.kspace, "Undersampled k-space file")->required();
    maps->add_option("--mask", mpa.mask, "Sampling mask file")->required();
    maps->add_option("--slice", mpa.slice, "Slice index");
    maps->add_flag("--no-apodize", mpa.no_apodize, "Disable Hann apodization of the ACS block");
    maps->add_option("--out", mpa.out, "Output maps file")->required();

    auto add_recon_common = [](CLI::App* cmd, ReconArgs& ra) {
        cmd->add_option("--kspace", ra.kspace, "Undersampled k-space file")->required();
        cmd->add_option("--mask", ra.mask, "Sampling mask file")->required();
        cmd->add_option("--slice", ra.slice, "Slice index");
        cmd->add_option("--out", ra.out, "Output image file")->required();
        cmd->add_option("--pgm", ra.pgm, "Also write a 16-bit PGM preview");
    };

    ReconArgs rz;
    CLI::App* recon_zf = app.add_subcommand("recon-zf", "Zero-filled RSS reconstruction");
    add_recon_common(recon_zf, rz);

    ReconArgs rp;
    CLI::App* recon_pdhg =
        app.add_subcommand("recon-pdhg", "Wavelet-L1 compressed-sensing reconstruction");
    add_recon_common(recon_pdhg, rp);
    recon_pdhg->add_option("--maps", rp.maps, "Coil maps file (default: estimate from ACS)");
    recon_pdhg->add_option("--lambda", rp.lambda, "L1 regularization weight");
    recon_pdhg->add_option("--iters", rp.iters, "Solver iterations");
    recon_pdhg->add_option("--levels", rp.levels, "Wavelet decomposition levels");
    recon_pdhg->add_option("--family", rp.family, "Wavelet family (haar|db2)");
    recon_pdhg->add_option("--trace", rp.trace, "Write per-iteration objective CSV");

    ReconArgs rx;
    CLI::App* recon_xpdnet =
        app.add_subcommand("recon-xpdnet", "Unrolled network reconstruction");
    add_recon_common(recon_xpdnet, rx);
    recon_xpdnet->add_option("--maps", rx.maps, "Coil maps file (default: estimate from ACS)");
    recon_xpdnet->add_option("--ckpt", rx.ckpt, "Trained checkpoint (default: untrained init)");

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the unrolled network");
    train_cmd->add_option("--config", ta.config, "key=value training config file")->required();
    train_cmd->add_option("--out-ckpt", ta.out_ckpt, "Checkpoint output path");
    train_cmd->add_option("--loss-csv", ta.loss_csv, "Per-step loss CSV path");
    train_cmd->add_option("--set", ta.overrides, "Override a config key (key=value, repeatable)");

    EvalArgs ea;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Compute PSNR / SSIM / MS-SSIM");
    eval_cmd->add_option("--recon", ea.recon, "Reconstruction (image container or PGM)")->required();
    eval_cmd->add_option("--target", ea.target, "Ground truth (image container or PGM)")->required();
    eval_cmd->add_option("--out-csv", ea.out_csv, "Append a row to this metrics CSV");
    eval_cmd->add_option("--method", ea.method, "Method label for the CSV row");
    eval_cmd->add_option("--accel", ea.accel, "Acceleration label for the CSV row");
    eval_cmd->add_option("--volume-id", ea.volume_id, "Volume label for the CSV row");
    eval_cmd->add_option("--slice", ea.slice, "Slice index");

    std::string gc_module;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
    gradcheck->add_option("--module", gc_module,
                          "Suite: conv|primitives|mwcnn|unet|xpdnet|loss (default: all)");

    try {
        app.parse(argc, argv);

        if (*phantom) cmd_phantom(pa);
        else if (*mask) cmd_mask(ma);
        else if (*sim) cmd_sim(sa);
        else if (*maps) cmd_maps(mpa);
        else if (*recon_zf) cmd_recon_zf(rz);
        else if (*recon_pdhg) cmd_recon_pdhg(rp);
        else if (*recon_xpdnet) cmd_recon_xpdnet(rx);
        else if (*train_cmd) cmd_train(ta);
        else if (*eval_cmd) cmd_eval(ea);
        else if (*gradcheck) return cmd_gradcheck(gc_module);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const mri::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.category()) {
            case mri::Error::Category::invalid_config: return 2;
            case mri::Error::Category::data_format: return 3;
            case mri::Error::Category::numeric: return 4;
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
