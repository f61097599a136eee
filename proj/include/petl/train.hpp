#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petl/augment.hpp"
#include "petl/dataset.hpp"
#include "petl/model.hpp"

namespace petl {

struct TrainConfig {
  float phase1_lr = 0.01f;
  float phase2_lr = 0.0001f;
  float baseline_lr = 0.01f;
  int batch = 32;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-7f;
  int epochs_phase1 = 100;
  int epochs_phase2 = 300;
  int epochs_baseline = 400;
  std::uint64_t seed = 0;

  // Per-epoch multiplicative learning-rate decay (1 = constant), applied
  // from lr_decay_start onwards.
  float lr_decay = 1.0f;
  int lr_decay_start = 0;

  bool augment = true;
  int augment_multiplier = 4;
  AugmentBounds bounds;

  // Optional early stop on the training loss plateau.
  bool early_stop = false;
  int patience = 20;
  float min_delta = 1e-4f;

  std::string metrics_path;  // CSV log (epoch,phase,loss,accuracy); empty = off
};

// Fixed epoch profiles per dataset.
TrainConfig dataset_profile(const std::string& name);

// A manifest sample with its image decoded, resized to 160x160, channel-
// replicated and normalized to [-1,1].
struct LoadedSample {
  Tensor image;                    // [160,160,3], values in [-1,1]
  std::vector<Point2f> landmarks;  // pixel coordinates in the 160x160 crop
  int label = 0;                   // index into the dataset class list
  std::string id;
};

std::vector<LoadedSample> load_dataset_images(const Dataset& ds);

struct TrainResult {
  int epochs_run = 0;
  float final_loss = 0;
  float final_accuracy = -1;  // classification phases only
};

// Joint training of extractor + classification head at baseline_lr.
TrainResult train_baseline(Model& model, const std::vector<LoadedSample>& samples,
                           const TrainConfig& cfg);

// Phase 1: extractor + localization head on the L1 landmark regression for
// the model's partition subset, at phase1_lr.
TrainResult train_phase1_landmarks(Model& model, const std::vector<LoadedSample>& samples,
                                   const TrainConfig& cfg);

// Phase 2: classification head + extractor fine-tuning at phase2_lr; the
// localization head is frozen (bitwise).
TrainResult train_phase2_classify(Model& model, const std::vector<LoadedSample>& samples,
                                  const TrainConfig& cfg);

// Mean L1 a constant per-coordinate mean predictor would achieve on the
// model's landmark targets; a trained model must beat this.
float mean_predictor_l1(const NetworkSpec& spec, const std::vector<LoadedSample>& samples);

// Mean landmark L1 of the model on the given samples (inference mode).
float landmark_l1(Model& model, const std::vector<LoadedSample>& samples);

struct PipelineResult {
  std::vector<std::string> checkpoint_paths;
  // Phase-1 snapshots (saved before phase-2 fine-tuning moves the extractor);
  // empty strings for baseline networks, which have no phase 1.
  std::vector<std::string> phase1_checkpoint_paths;
  std::vector<float> phase1_losses;  // per network; empty for the baseline
};

// Orchestrates the phases per network kind and writes checkpoints under
// out_dir. The part ensemble trains five sub-networks with fixed per-network
// seed offsets; baseline / full kinds can train `ensemble_count` models for
// comparison ensembles. PETL_THREADS caps cross-network parallelism.
PipelineResult train_full_pipeline(const Dataset& ds, const std::string& kind,
                                   const TrainConfig& cfg, const std::string& out_dir,
                                   int ensemble_count = 1);

int worker_count(std::size_t tasks);  // PETL_THREADS-capped

}  // namespace petl
