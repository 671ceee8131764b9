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

#include "sndcr/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "sndcr/checkpoint.hpp"

namespace sndcr {

namespace fs = std::filesystem;

double lr_at(int64_t epoch, const TrainConfig& cfg) {
  SNDCR_CHECK(epoch >= 1 && epoch <= cfg.epochs,
              "lr_at: epoch " << epoch << " outside [1, " << cfg.epochs << "]");
  if (epoch <= cfg.decay_start_epoch) return cfg.lr;
  const double span = static_cast<double>(cfg.epochs - cfg.decay_start_epoch);
  return cfg.lr * (1.0 - static_cast<double>(epoch - cfg.decay_start_epoch) / span);
}

namespace {

uint64_t hash_params(const ParamRefs<float>& params) {
  uint64_t h = 1469598103934665603ULL;
  for (const auto* p : params) {
    const auto* bytes =
        reinterpret_cast<const unsigned char*>(p->var.value().data());
    const size_t n = static_cast<size_t>(p->var.value().numel()) * sizeof(float);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

GeneratorConfig generator_config(const TrainConfig& cfg) {
  GeneratorConfig g;
  g.base_channels = static_cast<int>(cfg.base_channels);
  g.n_resblocks = static_cast<int>(cfg.n_resblocks);
  g.input_size = static_cast<int>(cfg.crop_size);
  g.power_iterations = static_cast<int>(cfg.power_iterations);
  return g;
}

double grad_l1(const ParamRefs<float>& params) {
  double s = 0;
  for (const auto* p : params) {
    if (!p->var.has_grad()) continue;
    for (int64_t i = 0; i < p->var.grad().numel(); ++i)
      s += std::abs(static_cast<double>(p->var.grad()[i]));
  }
  return s;
}

// Runs two independent graph-building tasks on the two cores; exceptions
// propagate to the caller.
template <typename FnA, typename FnB>
void parallel_invoke(FnA&& a, FnB&& b) {
  std::exception_ptr ea, eb;
#pragma omp parallel sections num_threads(2)
  {
#pragma omp section
    {
      try {
        a();
      } catch (...) {
        ea = std::current_exception();
      }
    }
#pragma omp section
    {
      try {
        b();
      } catch (...) {
        eb = std::current_exception();
      }
    }
  }
  if (ea) std::rethrow_exception(ea);
  if (eb) std::rethrow_exception(eb);
}

}  // namespace

TrainSession::TrainSession(const TrainConfig& cfg) : TrainSession(cfg, nullptr) {}

TrainSession::TrainSession(const TrainConfig& cfg, const TensorStore* store)
    : cfg_(cfg), pick_rng_(derive_seed(static_cast<uint64_t>(cfg.seed), "dcr.pick")) {
  cfg_.validate();
  seed_all(static_cast<uint64_t>(cfg_.seed));
  const uint64_t seed = static_cast<uint64_t>(cfg_.seed);

  RandomStream g_rng(derive_seed(seed, "init.g"));
  gen_ = std::make_unique<ResnetGenerator<float>>(generator_config(cfg_), g_rng);
  RandomStream d_rng(derive_seed(seed, "init.d"));
  disc_ = std::make_unique<PatchDiscriminator<float>>(
      static_cast<int>(cfg_.disc_channels), d_rng);
  heads_ = std::make_unique<PatchProjector<float>>(256,
                                                   derive_seed(seed, "init.heads"));
  if (cfg_.vgg_weights_path.empty())
    vgg_ = std::make_unique<VggExtractor<float>>(seed);
  else
    vgg_ = std::make_unique<VggExtractor<float>>(cfg_.vgg_weights_path);
  buffer_ = std::make_unique<ImageBuffer<float>>(
      static_cast<int>(cfg_.buffer_capacity),
      RandomStream(derive_seed(seed, "buffer")));
  opt_g_ = std::make_unique<Adam<float>>(cfg_.adam_beta1, cfg_.adam_beta2);
  opt_d_ = std::make_unique<Adam<float>>(cfg_.adam_beta1, cfg_.adam_beta2);

  if (cfg_.dataset == DatasetKind::kSynthetic) {
    SyntheticSpec sx{SyntheticKind::kCircles, static_cast<int>(cfg_.synthetic_n_train),
                     static_cast<int>(cfg_.synthetic_size),
                     derive_seed(seed, "synth.trainA")};
    SyntheticSpec sy{SyntheticKind::kSquares, static_cast<int>(cfg_.synthetic_n_train),
                     static_cast<int>(cfg_.synthetic_size),
                     derive_seed(seed, "synth.trainB")};
    data_ = std::make_unique<UnpairedDataset>(
        ImageSource::synthetic(sx), ImageSource::synthetic(sy),
        static_cast<int>(cfg_.load_size), static_cast<int>(cfg_.crop_size),
        cfg_.flip, derive_seed(seed, "data"));
  } else {
    data_ = std::make_unique<UnpairedDataset>(
        ImageSource::folder((fs::path(cfg_.data_root) / "trainA").string()),
        ImageSource::folder((fs::path(cfg_.data_root) / "trainB").string()),
        static_cast<int>(cfg_.load_size), static_cast<int>(cfg_.crop_size),
        cfg_.flip, derive_seed(seed, "data"));
  }

  if (store) {
    // Restore parameters (head dims are inferred from the stored tensors).
    for (const std::string& name : store->names()) {
      if (name.rfind("param/H.", 0) == 0 &&
          name.size() > 14 &&
          name.substr(name.size() - 11) == ".fc1.weight") {
        int layer = std::stoi(name.substr(8, name.find('.', 8) - 8));
        Tensor<float> w = store->get_f32(name);
        heads_->head_for(layer, w.dim(0));
      }
    }
    ParamRefs<float> params = gen_params();
    ParamRefs<float> dparams = disc_params();
    params.insert(params.end(), dparams.begin(), dparams.end());
    for (auto* p : params) {
      Tensor<float> t = store->get_f32("param/" + p->name);
      SNDCR_CHECK_SHAPE(t.shape() == p->var.value().shape(),
                        "checkpoint param " << p->name << " has shape "
                            << shape_str(t.shape()));
      p->var.mutable_value() = std::move(t);
    }
    auto sn = gen_->sn_convs();
    for (size_t i = 0; i < sn.size(); ++i)
      sn[i]->u = store->get_f32("sn_u/" + std::to_string(i));
    opt_g_->load(*store, "adam_g/", gen_params());
    opt_d_->load(*store, "adam_d/", disc_params());
    pick_rng_.restore(store->get_bytes("rng/pick"));
    buffer_->rng().restore(store->get_bytes("rng/buffer"));
    if (store->has("buffer/pool")) {
      Tensor<float> pool = store->get_f32("buffer/pool");
      std::vector<Tensor<float>> images;
      const int n = pool.dim(0);
      const int64_t sz = pool.numel() / n;
      for (int i = 0; i < n; ++i) {
        Tensor<float> img(Shape{1, pool.dim(1), pool.dim(2), pool.dim(3)});
        std::copy(pool.data() + i * sz, pool.data() + (i + 1) * sz, img.data());
        images.push_back(std::move(img));
      }
      buffer_->restore_pool(std::move(images));
    }
    data_->restore_state(store->get_bytes("rng/data"));
    epoch_ = store->get_i64("meta/epoch");
    global_iter_ = store->get_i64("meta/global_iter");
  }
}

TrainSession::~TrainSession() = default;

std::unique_ptr<TrainSession> TrainSession::resume(
    const std::string& checkpoint_path) {
  TensorStore store = TensorStore::load(checkpoint_path);
  TrainConfig cfg = parse_config(store.get_bytes("meta/config"), checkpoint_path);
  return std::unique_ptr<TrainSession>(new TrainSession(cfg, &store));
}

ParamRefs<float> TrainSession::gen_params() {
  ParamRefs<float> params;
  gen_->collect(params);
  heads_->collect(params);
  return params;
}

ParamRefs<float> TrainSession::disc_params() {
  ParamRefs<float> params;
  disc_->collect(params);
  return params;
}

Tensor<float> TrainSession::sample_real(bool from_y) {
  const int count = from_y ? data_->size_y() : data_->size_x();
  const int idx = pick_rng_.uniform_int(0, count - 1);
  return from_y ? data_->sample_from_y(idx) : data_->sample_from_x(idx);
}

LossReport<float> TrainSession::train_step(const Tensor<float>& x,
                                           const Tensor<float>& y) {
  const double lr = lr_at(std::min<int64_t>(epoch_ + 1, cfg_.epochs), cfg_);
  LossReport<float> report;

  // One shared sigma estimate (and one power-iteration update) per step;
  // the step's several forwards reuse the same normalized-weight subgraph.
  for (auto* conv : gen_->sn_convs()) {
    conv->cache_enabled = true;
    conv->clear_weight_cache();
    conv->warm_cache(/*training=*/true);
  }

  // (1) Generator forwards with taps; the x and y graphs are independent
  // and build on separate cores.
  Var<float> x_in(x), y_in(y);
  ResnetGenerator<float>::ForwardResult fwd_x, fwd_y;
  if (cfg_.use_patch_y) {
    parallel_invoke([&] { fwd_x = gen_->forward(x_in, true, true); },
                    [&] { fwd_y = gen_->forward(y_in, true, true); });
  } else {
    fwd_x = gen_->forward(x_in, true, true);
  }

  // (2) Discriminator step: real y against a buffer-replayed fake.
  ParamRefs<float> dparams = disc_params();
  set_requires_grad(dparams, true);
  zero_grads(dparams);
  Tensor<float> replay = buffer_->query(fwd_x.output.value());
  Var<float> d_real = disc_->forward(y_in);
  Var<float> d_fake = disc_->forward(Var<float>(replay));
  Var<float> adv_d = adversarial_loss(d_real, d_fake, cfg_.gan_mode,
                                      GanSide::kDiscriminator);
  report.adv_d = adv_d.value().item();
  if (!std::isfinite(static_cast<double>(report.adv_d)))
    throw TrainingAbort("non-finite loss component: adv_d at iteration " +
                        std::to_string(global_iter_ + 1));
  adv_d.backward();
  opt_d_->step(dparams, lr);

  // (3) Generator step against the full objective; D is frozen.
  set_requires_grad(dparams, false);
  ParamRefs<float> gparams_pre = gen_params();
  zero_grads(gparams_pre);

  Var<float> d_fake_g = disc_->forward(fwd_x.output);
  Var<float> adv_g = adversarial_loss(d_real.detached(), d_fake_g, cfg_.gan_mode,
                                      GanSide::kGenerator, cfg_.gan_nonsaturating);

  // Heads are created serially (the lazy map mutates), then the x-side and
  // y-side bank building runs concurrently.
  for (int l = 0; l < 5; ++l)
    heads_->head_for(l, fwd_x.taps.taps[static_cast<size_t>(l)].value().dim(1));

  auto build_banks = [&](const GeneratorTaps<float>& taps_in,
                         const GeneratorTaps<float>& taps_gen) {
    std::vector<PatchBank<float>> banks;
    for (int l = 0; l < 5; ++l) {
      const Var<float>& fi = taps_in.taps[static_cast<size_t>(l)];
      const Var<float>& fg = taps_gen.taps[static_cast<size_t>(l)];
      const int hw = fi.value().dim(2) * fi.value().dim(3);
      const int s = std::min<int>(static_cast<int>(cfg_.patches_per_layer), hw);
      ProjectionHead<float>& head = heads_->head_for(l, fi.value().dim(1));
      banks.push_back(select_anchors(fi, fg, s, head, l, cfg_.entropy_source));
    }
    return banks;
  };

  Var<float> patch_x, patch_y;
  if (cfg_.use_patch_y) {
    parallel_invoke(
        [&] {
          GeneratorTaps<float> taps_gx = gen_->encode_taps(fwd_x.output, true);
          patch_x = patch_loss(build_banks(fwd_x.taps, taps_gx),
                               static_cast<float>(cfg_.tau));
        },
        [&] {
          GeneratorTaps<float> taps_gy = gen_->encode_taps(fwd_y.output, true);
          patch_y = patch_loss(build_banks(fwd_y.taps, taps_gy),
                               static_cast<float>(cfg_.tau));
        });
  } else {
    GeneratorTaps<float> taps_gx = gen_->encode_taps(fwd_x.output, true);
    patch_x = patch_loss(build_banks(fwd_x.taps, taps_gx),
                         static_cast<float>(cfg_.tau));
  }
  Var<float> total = add(adv_g, patch_x);
  if (cfg_.use_patch_y) {
    total = add(total, patch_y);
    report.patch_y = patch_y.value().item();
  }
  report.adv_g = adv_g.value().item();
  report.patch_x = patch_x.value().item();

  const bool need_sem = cfg_.lambda_semantic > 0;
  const bool need_style = cfg_.lambda_style > 0;
  if (need_sem || need_style) {
    Var<float> sem_acc, style_acc;
    const int pairs = static_cast<int>(
        std::min<int64_t>(cfg_.dcr_positives, cfg_.dcr_negatives));
    VggTaps<float> taps_g;
    for (int k = 0; k < pairs; ++k) {
      // Real draws consume shared streams, so sample serially and then
      // extract features concurrently.
      Var<float> p_img(sample_real(true));
      Var<float> n_img(sample_real(false));
      VggTaps<float> taps_p, taps_n;
      if (k == 0) {
        parallel_invoke([&] { taps_g = vgg_->extract(fwd_x.output); },
                        [&] {
                          taps_p = vgg_->extract(p_img);
                          taps_n = vgg_->extract(n_img);
                        });
      } else {
        parallel_invoke([&] { taps_p = vgg_->extract(p_img); },
                        [&] { taps_n = vgg_->extract(n_img); });
      }
      if (need_sem) {
        Var<float> s = semantic_loss(taps_g, taps_p, taps_n);
        sem_acc = sem_acc.defined() ? add(sem_acc, s) : s;
      }
      if (need_style) {
        Var<float> s = style_loss(taps_g, taps_p, taps_n,
                                  static_cast<float>(cfg_.alpha_style));
        style_acc = style_acc.defined() ? add(style_acc, s) : s;
      }
    }
    if (sem_acc.defined()) sem_acc = scale(sem_acc, 1.0f / pairs);
    if (style_acc.defined()) style_acc = scale(style_acc, 1.0f / pairs);
    Var<float> zero(Tensor<float>::scalar(0.0f));
    Var<float> dual = dual_loss(need_sem ? sem_acc : zero,
                                need_style ? style_acc : zero,
                                static_cast<float>(cfg_.lambda_semantic),
                                static_cast<float>(cfg_.lambda_style));
    report.semantic = need_sem ? sem_acc.value().item() : 0.0f;
    report.style = need_style ? style_acc.value().item() : 0.0f;
    report.dual = dual.value().item();
    total = add(total, dual);
  }

  try {
    total_loss(report);
  } catch (const TrainingAbort& e) {
    ParamRefs<float> gp = gen_params();
    std::ostringstream oss;
    oss << e.what() << " (iteration " << global_iter_ + 1
        << ", |grad_G|_1=" << grad_l1(gp) << ", |grad_D|_1=" << grad_l1(dparams)
        << ")";
    throw TrainingAbort(oss.str());
  }

  total.backward();
  // Heads may have been created during this step; collect again.
  opt_g_->step(gen_params(), lr);
  ++global_iter_;
  return report;
}

Tensor<float> TrainSession::translate(const Tensor<float>& x) {
  return gen_->generate(Var<float>(x), /*training=*/false).value();
}

uint64_t TrainSession::generator_param_hash() { return hash_params(gen_params()); }
uint64_t TrainSession::discriminator_param_hash() {
  return hash_params(disc_params());
}

void TrainSession::save_checkpoint(const std::string& path) {
  TensorStore store;
  store.put_bytes("meta/config", save_config(cfg_));
  store.put_i64("meta/epoch", epoch_);
  store.put_i64("meta/global_iter", global_iter_);
  for (auto* p : gen_params()) store.put("param/" + p->name, p->var.value());
  for (auto* p : disc_params()) store.put("param/" + p->name, p->var.value());
  auto sn = gen_->sn_convs();
  for (size_t i = 0; i < sn.size(); ++i)
    store.put("sn_u/" + std::to_string(i), sn[i]->u);
  opt_g_->save(store, "adam_g/");
  opt_d_->save(store, "adam_d/");
  store.put_bytes("rng/pick", pick_rng_.serialize());
  store.put_bytes("rng/buffer", buffer_->rng().serialize());
  store.put_bytes("rng/data", data_->serialize_state());
  if (buffer_->size() > 0) {
    const auto& pool = buffer_->pool();
    const Shape s = pool[0].shape();
    Tensor<float> packed(Shape{static_cast<int>(pool.size()), s[1], s[2], s[3]});
    for (size_t i = 0; i < pool.size(); ++i)
      std::copy(pool[i].data(), pool[i].data() + pool[i].numel(),
                packed.data() + static_cast<int64_t>(i) * pool[i].numel());
    store.put("buffer/pool", packed);
  }
  store.save(path);
}

void TrainSession::write_samples(const std::string& out_dir, int64_t epoch) {
  // A fixed seeded set of four test inputs keeps sheets comparable across
  // epochs.
  std::vector<ImageU8> tiles;
  for (int i = 0; i < 4; ++i) {
    Tensor<float> x;
    if (cfg_.dataset == DatasetKind::kSynthetic) {
      SyntheticSpec spec{SyntheticKind::kCircles, 4,
                         static_cast<int>(cfg_.crop_size),
                         derive_seed(static_cast<uint64_t>(cfg_.seed),
                                     "synth.testA")};
      x = to_tensor(render_synthetic(spec, i));
    } else {
      ImageSource src =
          ImageSource::folder((fs::path(cfg_.data_root) / "testA").string());
      ImageU8 img = from_tensor(src.load(i % src.count()));
      x = to_tensor(resize_bilinear(img, static_cast<int>(cfg_.crop_size),
                                    static_cast<int>(cfg_.crop_size)));
    }
    tiles.push_back(from_tensor(x));
    tiles.push_back(from_tensor(translate(x)));
  }
  // Interleaved input/output columns, one row per sample pair.
  char name[64];
  std::snprintf(name, sizeof(name), "samples_epoch%05lld.png",
                static_cast<long long>(epoch));
  save_image_u8(hstack_grid(tiles, 2), (fs::path(out_dir) / name).string());
}

std::string TrainSession::fit(const std::string& out_dir, std::ostream* echo) {
  fs::create_directories(out_dir);
  std::ofstream log((fs::path(out_dir) / "loss_log.txt").string(),
                    std::ios::app);
  if (!log) throw IoError("cannot open loss log in '" + out_dir + "'");
  std::string last_ckpt;
  for (int64_t e = epoch_ + 1; e <= cfg_.epochs; ++e) {
    const int iters = data_->epoch_length();
    for (int it = 0; it < iters; ++it) {
      auto [x, y] = data_->next_batch(static_cast<int>(cfg_.batch_size));
      LossReport<float> report = train_step(x, y);
      std::ostringstream line;
      line.precision(9);
      line << "epoch=" << e << " iter=" << global_iter_ << " lr=" << lr_at(e, cfg_)
           << " " << format_loss_report(report);
      log << line.str() << "\n";
      if (echo) (*echo) << line.str() << "\n";
    }
    log.flush();
    epoch_ = e;
    if (e % cfg_.checkpoint_every == 0 || e == cfg_.epochs) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%05lld.ckpt",
                    static_cast<long long>(e));
      last_ckpt = (fs::path(out_dir) / name).string();
      save_checkpoint(last_ckpt);
    }
    if (e % cfg_.sample_every == 0 || e == cfg_.epochs)
      write_samples(out_dir, e);
  }
  if (last_ckpt.empty()) {
    last_ckpt = (fs::path(out_dir) / "checkpoint_final.ckpt").string();
    save_checkpoint(last_ckpt);
  }
  return last_ckpt;
}

LoadedGenerator load_generator(const std::string& checkpoint_path) {
  TensorStore store = TensorStore::load(checkpoint_path);
  LoadedGenerator out;
  out.cfg = parse_config(store.get_bytes("meta/config"), checkpoint_path);
  RandomStream g_rng(derive_seed(static_cast<uint64_t>(out.cfg.seed), "init.g"));
  out.gen = std::make_unique<ResnetGenerator<float>>(generator_config(out.cfg),
                                                     g_rng);
  ParamRefs<float> params;
  out.gen->collect(params);
  for (auto* p : params) {
    Tensor<float> t = store.get_f32("param/" + p->name);
    SNDCR_CHECK_SHAPE(t.shape() == p->var.value().shape(),
                      "checkpoint param " << p->name << " has shape "
                          << shape_str(t.shape()));
    p->var.mutable_value() = std::move(t);
  }
  auto sn = out.gen->sn_convs();
  for (size_t i = 0; i < sn.size(); ++i)
    sn[i]->u = store.get_f32("sn_u/" + std::to_string(i));
  return out;
}

}  // namespace sndcr
