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

#include "sndcr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sndcr/tensor.hpp"

namespace sndcr {

namespace {

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

int64_t parse_i64(const std::string& s) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ConfigError("expected integer, got '" + s + "'");
  return v;
}

double parse_f64(const std::string& s) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected number, got '" + s + "'");
  }
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected true/false, got '" + s + "'");
}

std::string fmt_f64(double v) {
  std::ostringstream oss;
  oss.precision(17);
  oss << v;
  return oss.str();
}

const std::map<std::string, Field>& field_table() {
#define SNDCR_I64_FIELD(name)                                                  \
  {#name,                                                                      \
   {[](TrainConfig& c, const std::string& s) { c.name = parse_i64(s); },       \
    [](const TrainConfig& c) { return std::to_string(c.name); }}}
#define SNDCR_F64_FIELD(name)                                                  \
  {#name,                                                                      \
   {[](TrainConfig& c, const std::string& s) { c.name = parse_f64(s); },       \
    [](const TrainConfig& c) { return fmt_f64(c.name); }}}
#define SNDCR_BOOL_FIELD(name)                                                 \
  {#name,                                                                      \
   {[](TrainConfig& c, const std::string& s) { c.name = parse_bool(s); },      \
    [](const TrainConfig& c) { return c.name ? "true" : "false"; }}}
#define SNDCR_STR_FIELD(name)                                                  \
  {#name,                                                                      \
   {[](TrainConfig& c, const std::string& s) { c.name = s; },                  \
    [](const TrainConfig& c) { return c.name; }}}

  static const std::map<std::string, Field> table = {
      SNDCR_I64_FIELD(epochs),
      SNDCR_I64_FIELD(decay_start_epoch),
      SNDCR_F64_FIELD(lr),
      SNDCR_F64_FIELD(adam_beta1),
      SNDCR_F64_FIELD(adam_beta2),
      SNDCR_I64_FIELD(batch_size),
      SNDCR_I64_FIELD(load_size),
      SNDCR_I64_FIELD(crop_size),
      SNDCR_BOOL_FIELD(flip),
      SNDCR_I64_FIELD(synthetic_n_train),
      SNDCR_I64_FIELD(synthetic_n_test),
      SNDCR_I64_FIELD(synthetic_size),
      SNDCR_STR_FIELD(data_root),
      SNDCR_F64_FIELD(tau),
      SNDCR_F64_FIELD(alpha_style),
      SNDCR_F64_FIELD(lambda_semantic),
      SNDCR_F64_FIELD(lambda_style),
      SNDCR_I64_FIELD(patches_per_layer),
      SNDCR_BOOL_FIELD(use_patch_y),
      SNDCR_BOOL_FIELD(gan_nonsaturating),
      SNDCR_I64_FIELD(dcr_positives),
      SNDCR_I64_FIELD(dcr_negatives),
      SNDCR_I64_FIELD(n_resblocks),
      SNDCR_I64_FIELD(base_channels),
      SNDCR_I64_FIELD(disc_channels),
      SNDCR_I64_FIELD(power_iterations),
      SNDCR_STR_FIELD(vgg_weights_path),
      SNDCR_I64_FIELD(buffer_capacity),
      SNDCR_I64_FIELD(seed),
      SNDCR_I64_FIELD(checkpoint_every),
      SNDCR_I64_FIELD(sample_every),
      SNDCR_I64_FIELD(swd_projections),
      SNDCR_I64_FIELD(swd_pyramid_level),
      {"gan_mode",
       {[](TrainConfig& c, const std::string& s) {
          if (s == "logistic")
            c.gan_mode = GanMode::kLogistic;
          else if (s == "least_squares")
            c.gan_mode = GanMode::kLeastSquares;
          else
            throw ConfigError("gan_mode must be logistic or least_squares, got '" +
                              s + "'");
        },
        [](const TrainConfig& c) { return to_string(c.gan_mode); }}},
      {"entropy_source",
       {[](TrainConfig& c, const std::string& s) {
          if (s == "generated")
            c.entropy_source = EntropySource::kGenerated;
          else if (s == "input")
            c.entropy_source = EntropySource::kInput;
          else
            throw ConfigError("entropy_source must be generated or input, got '" +
                              s + "'");
        },
        [](const TrainConfig& c) { return to_string(c.entropy_source); }}},
      {"dataset",
       {[](TrainConfig& c, const std::string& s) {
          if (s == "synthetic")
            c.dataset = DatasetKind::kSynthetic;
          else if (s == "folders")
            c.dataset = DatasetKind::kFolders;
          else
            throw ConfigError("dataset must be synthetic or folders, got '" + s +
                              "'");
        },
        [](const TrainConfig& c) { return to_string(c.dataset); }}},
  };
#undef SNDCR_I64_FIELD
#undef SNDCR_F64_FIELD
#undef SNDCR_BOOL_FIELD
#undef SNDCR_STR_FIELD
  return table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

#define SNDCR_CFG_CHECK(cond, msg)                      \
  do {                                                  \
    if (!(cond)) {                                      \
      std::ostringstream oss_;                          \
      oss_ << msg;                                      \
      throw ConfigError(oss_.str());                    \
    }                                                   \
  } while (0)

}  // namespace

std::string to_string(GanMode m) {
  return m == GanMode::kLogistic ? "logistic" : "least_squares";
}
std::string to_string(EntropySource s) {
  return s == EntropySource::kGenerated ? "generated" : "input";
}
std::string to_string(DatasetKind d) {
  return d == DatasetKind::kSynthetic ? "synthetic" : "folders";
}

void TrainConfig::validate() const {
  SNDCR_CFG_CHECK(epochs >= 1, "epochs must be >= 1, got " << epochs);
  SNDCR_CFG_CHECK(decay_start_epoch >= 1 && decay_start_epoch <= epochs,
                  "decay_start_epoch must be in [1, epochs], got "
                      << decay_start_epoch << " with epochs " << epochs);
  SNDCR_CFG_CHECK(lr > 0, "lr must be > 0, got " << lr);
  SNDCR_CFG_CHECK(adam_beta1 >= 0 && adam_beta1 < 1, "adam_beta1 out of [0, 1)");
  SNDCR_CFG_CHECK(adam_beta2 >= 0 && adam_beta2 < 1, "adam_beta2 out of [0, 1)");
  SNDCR_CFG_CHECK(batch_size >= 1, "batch_size must be >= 1, got " << batch_size);
  SNDCR_CFG_CHECK(crop_size <= load_size, "crop_size " << crop_size
                      << " must be <= load_size " << load_size);
  SNDCR_CFG_CHECK(crop_size >= 16 && crop_size % 4 == 0,
                  "crop_size must be >= 16 and divisible by 4, got " << crop_size);
  // The feature extractor pools four times, so the dual regularization
  // needs crops divisible by 16.
  SNDCR_CFG_CHECK(!(lambda_semantic > 0 || lambda_style > 0) || crop_size % 16 == 0,
                  "crop_size must be divisible by 16 when the dual "
                  "regularization is enabled, got " << crop_size);
  SNDCR_CFG_CHECK(tau > 0, "tau must be > 0, got " << tau);
  SNDCR_CFG_CHECK(alpha_style > 0, "alpha_style must be > 0, got " << alpha_style);
  // Zero weights are allowed so the regularization can be ablated.
  SNDCR_CFG_CHECK(lambda_semantic >= 0,
                  "lambda_semantic must be >= 0, got " << lambda_semantic);
  SNDCR_CFG_CHECK(lambda_style >= 0,
                  "lambda_style must be >= 0, got " << lambda_style);
  SNDCR_CFG_CHECK(patches_per_layer >= 2,
                  "patches_per_layer must be >= 2, got " << patches_per_layer);
  SNDCR_CFG_CHECK(n_resblocks >= 1, "n_resblocks must be >= 1");
  SNDCR_CFG_CHECK(base_channels >= 16 && base_channels % 16 == 0,
                  "base_channels must be a positive multiple of 16, got "
                      << base_channels);
  SNDCR_CFG_CHECK(disc_channels >= 8, "disc_channels must be >= 8");
  SNDCR_CFG_CHECK(power_iterations >= 1, "power_iterations must be >= 1");
  SNDCR_CFG_CHECK(buffer_capacity >= 0, "buffer_capacity must be >= 0");
  SNDCR_CFG_CHECK(dcr_positives >= 1 && dcr_negatives >= 1,
                  "dcr_positives/dcr_negatives must be >= 1");
  SNDCR_CFG_CHECK(checkpoint_every >= 1 && sample_every >= 1,
                  "checkpoint_every and sample_every must be >= 1");
  SNDCR_CFG_CHECK(swd_projections >= 1, "swd_projections must be >= 1");
  SNDCR_CFG_CHECK(swd_pyramid_level >= 0 && swd_pyramid_level <= 4,
                  "swd_pyramid_level must be in [0, 4]");
  if (dataset == DatasetKind::kFolders)
    SNDCR_CFG_CHECK(!data_root.empty(), "data_root required when dataset=folders");
  if (dataset == DatasetKind::kSynthetic) {
    SNDCR_CFG_CHECK(synthetic_n_train >= 1 && synthetic_n_test >= 1,
                    "synthetic_n_train/synthetic_n_test must be >= 1");
    SNDCR_CFG_CHECK(synthetic_size >= 16 && synthetic_size % 4 == 0,
                    "synthetic_size must be >= 16 and divisible by 4, got "
                        << synthetic_size);
  }
}

TrainConfig parse_config(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  std::istringstream iss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(iss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    auto it = field_table().find(key);
    if (it == field_table().end())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
    try {
      it->second.set(cfg, val);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + key +
                        ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream oss;
  oss << f.rdbuf();
  return parse_config(oss.str(), path);
}

void apply_override(TrainConfig& cfg, const std::string& kv) {
  size_t eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + kv + "' is not key=value");
  std::string key = trim(kv.substr(0, eq));
  std::string val = trim(kv.substr(eq + 1));
  auto it = field_table().find(key);
  if (it == field_table().end())
    throw ConfigError("override names unknown key '" + key + "'");
  it->second.set(cfg, val);
}

std::string save_config(const TrainConfig& cfg) {
  std::ostringstream oss;
  for (const auto& [name, field] : field_table())
    oss << name << "=" << field.get(cfg) << "\n";
  return oss.str();
}

void save_config_file(const TrainConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write config file '" + path + "'");
  f << save_config(cfg);
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  for (const auto& [name, field] : field_table())
    if (field.get(a) != field.get(b)) return false;
  return true;
}

}  // namespace sndcr
