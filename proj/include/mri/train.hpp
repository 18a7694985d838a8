#pragma once

#include <string>
#include <vector>

#include "mri/autodiff.hpp"
#include "mri/data_io.hpp"
#include "mri/networks.hpp"
#include "mri/types.hpp"

namespace mri {

/// Synthetic training corpus: deterministic phantom variants with smooth
/// complex coil maps, retrospectively undersampled.
struct DatasetConfig {
    int n_slices = 32;
    int image_size = 32;
    int coils = 2;
    double noise_sigma = 0.0; // complex Gaussian noise added to sampled entries
    bool smooth_phase = true;

    void validate() const;
};

struct TrainConfig {
    int epochs = 5;
    int fine_tune_epochs = 0;
    int fine_tune_contrast = -1; // 0..3 selects the contrast used in fine-tuning
    int accel = 4;
    int acs = 0;     // 0 -> default_acs_count(image_size, accel)
    uint64_t seed = 0;
    int max_steps = 0; // 0 -> no cap
    double lr = 1e-3;
    double loss_alpha = 0.5;
    double loss_beta = 0.5;
    double clip_norm = 0.0;
    int checkpoint_every = 0; // 0 -> only the final checkpoint
    std::string ckpt_path;
    std::string loss_csv_path;
    DatasetConfig data;
    XpdnetConfig model;

    void validate() const;
};

/// Contrast label cycle for synthetic slices: t1, t2, flair, t1post, t1, ...
Contrast synthetic_contrast(int slice_index);

/// One fully prepared training example.
struct TrainSample {
    ComplexImage truth;      // complex ground-truth image
    RealImage target;        // |truth| / tmax, the normalized loss target
    double tmax = 0.0;       // normalization constant (max |truth|)
    CoilKSpace y;            // undersampled noisy measurements
    SamplingMask mask;
    SensitivitySet maps;     // ACS-estimated maps (what the network consumes)
    Contrast contrast = Contrast::synthetic;
};

TrainSample make_train_sample(const DatasetConfig& data, int index, int accel, int acs,
                              uint64_t seed);

struct LossRow {
    int step = 0;  // 1-based global step
    int epoch = 0; // 0-based epoch
    double loss = 0.0;
    double l1_term = 0.0;     // alpha-weighted smooth-L1 contribution
    double msssim_term = 0.0; // beta-weighted (1 - MS-SSIM) contribution
};

struct Visit {
    int step = 0;
    int epoch = 0;
    int sample = 0;
    Contrast contrast = Contrast::synthetic;
};

struct TrainReport {
    std::vector<LossRow> history;
    std::vector<Visit> visited;
    double initial_smoothed = 0.0; // mean loss over the first window
    double final_smoothed = 0.0;   // mean loss over the last window
    int smoothing_window = 0;
    int steps = 0;
    int rejected_steps = 0;
};

/// Run the training loop. `ps` must be empty; it receives the initialized
/// parameters and holds the trained values afterwards.
TrainReport train(const TrainConfig& cfg, ParamStore& ps);

void write_loss_csv(const std::string& path, const std::vector<LossRow>& history);

/// Parse a key=value config file ('#' comments allowed). Unknown keys raise
/// InvalidConfigError. See the README for the key list.
TrainConfig parse_train_config(const std::string& path);

/// Apply a single "key=value" override on top of an existing config.
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Assemble the checkpoint for the current parameter + optimizer state.
Checkpoint snapshot_checkpoint(const ParamStore& ps, const TrainConfig& cfg,
                               const class Radam* opt);

} // namespace mri
