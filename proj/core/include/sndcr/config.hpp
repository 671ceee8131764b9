// Copyright (c) 2026 The sndcr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sndcr {

enum class GanMode { kLogistic, kLeastSquares };
enum class EntropySource { kGenerated, kInput };
enum class DatasetKind { kSynthetic, kFolders };

/// Every training hyperparameter, serializable to flat key=value text with
/// '#' comments. One config file drives train, translate and evaluate.
struct TrainConfig {
  // Optimization schedule.
  int64_t epochs = 400;
  int64_t decay_start_epoch = 200;
  double lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int64_t batch_size = 1;

  // Data pipeline.
  int64_t load_size = 286;
  int64_t crop_size = 256;
  bool flip = true;
  DatasetKind dataset = DatasetKind::kSynthetic;
  std::string data_root;
  int64_t synthetic_n_train = 200;
  int64_t synthetic_n_test = 32;
  int64_t synthetic_size = 64;

  // Losses.
  double tau = 0.07;
  double alpha_style = 0.04;
  double lambda_semantic = 1.0;
  double lambda_style = 0.5;
  int64_t patches_per_layer = 256;
  bool use_patch_y = true;
  GanMode gan_mode = GanMode::kLogistic;
  bool gan_nonsaturating = false;
  int64_t dcr_positives = 1;
  int64_t dcr_negatives = 1;

  // Architecture.
  int64_t n_resblocks = 9;
  int64_t base_channels = 64;
  int64_t disc_channels = 64;
  int64_t power_iterations = 1;
  EntropySource entropy_source = EntropySource::kGenerated;
  std::string vgg_weights_path;

  // Discriminator history buffer.
  int64_t buffer_capacity = 50;

  // Bookkeeping.
  int64_t seed = 17;
  int64_t checkpoint_every = 50;
  int64_t sample_every = 50;

  // Metrics defaults.
  int64_t swd_projections = 128;
  int64_t swd_pyramid_level = 1;

  /// Throws ConfigError naming the violated field.
  void validate() const;
};

/// Parses a flat key=value file; missing keys keep defaults. Throws
/// ConfigError naming the offending line on parse failure and the offending
/// field on invariant violation.
TrainConfig load_config(const std::string& path);

/// Parses config text (same format as the file contents).
TrainConfig parse_config(const std::string& text, const std::string& origin);

/// Applies a single "key=value" override.
void apply_override(TrainConfig& cfg, const std::string& kv);

/// Serializes every key deterministically; load(save(cfg)) == cfg.
std::string save_config(const TrainConfig& cfg);
void save_config_file(const TrainConfig& cfg, const std::string& path);

bool operator==(const TrainConfig& a, const TrainConfig& b);

std::string to_string(GanMode m);
std::string to_string(EntropySource s);
std::string to_string(DatasetKind d);

}  // namespace sndcr
