#include "nsx/harness/train.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "nsx/harness/image.hpp"
#include "nsx/tensor/adam.hpp"
#include "nsx/tensor/ops.hpp"
#include "nsx/tensor/random.hpp"

namespace nsx {

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, Parse parse) {
  std::vector<T> out;
  std::istringstream parts(value);
  std::string item;
  while (std::getline(parts, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += fmt::format("{}{}", i ? "," : "", values[i]);
  return out;
}

std::vector<int> scaled_milestones(int epochs, std::initializer_list<double> fractions) {
  std::vector<int> out;
  for (double f : fractions) {
    const int m = static_cast<int>(std::lround(f * epochs));
    if (m > 0 && m < epochs && (out.empty() || m > out.back())) out.push_back(m);
  }
  return out;
}

Tensor random_patch(const Tensor& image, int patch, Rng& rng) {
  const Index h = image.dim(2), w = image.dim(3);
  const Index y0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(h - patch + 1)));
  const Index x0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(w - patch + 1)));
  if (h == patch && w == patch) return image;
  const auto src = image.data();
  std::vector<float> out(static_cast<std::size_t>(3 * patch * patch));
  for (Index c = 0; c < 3; ++c) {
    for (Index y = 0; y < patch; ++y) {
      for (Index x = 0; x < patch; ++x) out[(c * patch + y) * patch + x] = src[(c * h + y0 + y) * w + x0 + x];
    }
  }
  return Tensor(Shape{1, 3, patch, patch}, std::move(out));
}

// Every image appears `views` times in shuffled order, each as its own augmented patch.
std::vector<Tensor> epoch_samples(const std::vector<Tensor>& images, const TrainConfig& cfg, Rng& rng) {
  std::vector<std::size_t> order(images.size() * static_cast<std::size_t>(cfg.views));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % images.size();
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<Tensor> out;
  for (const auto i : order) {
    Tensor img = images[i];
    if (cfg.augment && std::min(img.dim(2), img.dim(3)) >= 2 * cfg.patch_size && rng.below(2) == 1) {
      img = downsample_half(img);
    }
    img = random_patch(img, cfg.patch_size, rng);
    if (cfg.augment) img = dihedral(img, static_cast<int>(rng.below(8)));
    out.push_back(img);
  }
  return out;
}

void check_images(const std::vector<Tensor>& images, const TrainConfig& cfg) {
  cfg.validate();
  if (images.empty()) throw std::invalid_argument("train: no training images");
  for (const auto& img : images) {
    if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 3) {
      throw ShapeError("train: expected [1,3,H,W] images, got " + to_string(img.shape()));
    }
    if (std::min(img.dim(2), img.dim(3)) < cfg.patch_size) {
      throw std::invalid_argument(fmt::format("train: image {}x{} is smaller than the {} patch", img.dim(3),
                                              img.dim(2), cfg.patch_size));
    }
  }
}

std::vector<std::uint8_t> stage1_bytes(const Model& model) {
  std::vector<std::uint8_t> out;
  for (const auto& t : model.stage1_parameters()) {
    const auto d = t.data();
    const auto* p = reinterpret_cast<const std::uint8_t*>(d.data());
    out.insert(out.end(), p, p + d.size() * sizeof(float));
  }
  return out;
}

// Shared epoch loop; `step` runs one batch and returns (loss, mse, bpp).
template <typename Step>
std::vector<EpochStats> run_epochs(Model& model, const std::vector<Tensor>& images, const TrainConfig& cfg,
                                   Adam& optimizer, const EpochCallback& on_epoch, Step step) {
  Rng rng(cfg.seed);
  std::vector<EpochStats> log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto snapshot = model.parameters().to_bytes();
    optimizer.set_lr(cfg.lr_at(epoch));
    const auto samples = epoch_samples(images, cfg, rng);
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.lr = optimizer.lr();
    for (std::size_t b = 0; b < samples.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(samples.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const auto batch = concat_batch(std::vector<Tensor>(samples.begin() + b, samples.begin() + end));
      optimizer.zero_grad();
      const auto [loss, mse, bpp] = step(batch, rng.next());
      if (!std::isfinite(loss.item())) {
        model.parameters().load_bytes(snapshot);
        throw DivergenceError(fmt::format("training diverged in epoch {}: loss is {}", epoch + 1, loss.item()),
                              epoch + 1);
      }
      loss.backward();
      if (cfg.clip_norm > 0) clip_grad_norm(optimizer.params(), cfg.clip_norm);
      optimizer.step();
      const double share = double(end - b) / double(samples.size());
      stats.loss += share * loss.item();
      stats.mse += share * mse;
      stats.bpp += share * bpp;
    }
    log.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return log;
}

}  // namespace

double TrainConfig::lr_at(int epoch) const {
  double factor = 1.0;
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (epoch >= milestones[i]) factor = multipliers[i];
  }
  return lr * factor;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(stage == 1 || stage == 2, "stage must be 1 or 2");
  require(epochs > 0, "epochs must be positive");
  require(lr > 0 && std::isfinite(lr), "lr must be positive");
  require(milestones.size() == multipliers.size(), "milestones and multipliers must pair up");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    require(milestones[i] > 0 && milestones[i] < epochs, "milestones must lie inside the epoch range");
    require(i == 0 || milestones[i] > milestones[i - 1], "milestones must be strictly increasing");
    require(multipliers[i] > 0, "multipliers must be positive");
  }
  require(batch_size > 0, "batch_size must be positive");
  require(views > 0, "views must be positive");
  require(clip_norm >= 0 && std::isfinite(clip_norm), "clip_norm must be finite and non-negative");
  require(patch_size > 0 && patch_size % 64 == 0, "patch_size must be a positive multiple of 64");
}

bool TrainConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "stage") stage = std::stoi(value);
    else if (key == "epochs") epochs = std::stoi(value);
    else if (key == "lr") lr = std::stod(value);
    else if (key == "milestones") milestones = parse_list<int>(value, [](const std::string& s) { return std::stoi(s); });
    else if (key == "multipliers") {
      multipliers = parse_list<double>(value, [](const std::string& s) { return std::stod(s); });
    } else if (key == "batch_size") batch_size = std::stoi(value);
    else if (key == "patch_size") patch_size = std::stoi(value);
    else if (key == "views") views = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "augment") augment = std::stoi(value) != 0;
    else if (key == "clip_norm") clip_norm = std::stod(value);
    else return false;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("train config: bad value for '" + key + "': " + value);
  }
  return true;
}

std::string TrainConfig::to_text() const {
  return fmt::format(
      "stage={}\nepochs={}\nlr={}\nmilestones={}\nmultipliers={}\nbatch_size={}\npatch_size={}\nviews={}\nseed={}\naugment={}\n"
      "clip_norm={}\n",
      stage, epochs, lr, join(milestones), join(multipliers), batch_size, patch_size, views, seed, augment ? 1 : 0, clip_norm);
}

TrainConfig TrainConfig::desk_stage1(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.lr = 5e-3;
  c.views = 8;
  c.milestones = scaled_milestones(epochs, {0.8, 0.9, 0.95});
  c.multipliers = {0.5, 0.25, 0.125};
  c.multipliers.resize(c.milestones.size());
  return c;
}

TrainConfig TrainConfig::desk_stage2(int epochs) {
  TrainConfig c;
  c.stage = 2;
  c.epochs = epochs;
  c.lr = 1e-3;
  c.milestones = scaled_milestones(epochs, {0.8, 0.9});
  c.multipliers = {0.5, 0.25};
  c.multipliers.resize(c.milestones.size());
  return c;
}

TrainConfig TrainConfig::full_stage1() {
  TrainConfig c;
  c.epochs = 5000;
  c.lr = 1e-4;
  c.milestones = {4000, 4500, 4750};
  c.multipliers = {0.5, 0.25, 0.125};
  c.patch_size = 256;
  return c;
}

TrainConfig TrainConfig::full_stage2() {
  TrainConfig c;
  c.stage = 2;
  c.epochs = 1500;
  c.lr = 1e-4;
  c.milestones = {1200, 1350};
  c.multipliers = {0.5, 0.25};
  c.patch_size = 256;
  return c;
}

std::vector<EpochStats> train_stage1(Model& model, const std::vector<Tensor>& images, const TrainConfig& config,
                                     const EpochCallback& on_epoch) {
  check_images(images, config);
  Adam optimizer(model.stage1_parameters(), AdamOptions{config.lr});
  const double lambda = model.config().lambda;
  return run_epochs(model, images, config, optimizer, on_epoch, [&](const Tensor& batch, std::uint64_t seed) {
    const auto r = model.forward(batch, QuantizerMode::Noise, seed);
    const double pixels = double(batch.dim(0) * batch.dim(2) * batch.dim(3));
    const auto t = rd_loss(batch, r.x_hat, r.lik_c, r.lik_s, r.lik_h, lambda, pixels);
    return std::tuple{t.loss, t.mse, t.bits_c / pixels + t.bits_s / pixels + t.bits_h / pixels};
  });
}

std::vector<EpochStats> train_stage2(Model& model, const std::vector<Tensor>& images, const TrainConfig& config,
                                     const EpochCallback& on_epoch) {
  check_images(images, config);
  const auto frozen = model.stage1_parameters();
  std::vector<bool> previous;
  for (auto t : frozen) {
    previous.push_back(t.requires_grad());
    t.set_requires_grad(false);
  }
  const auto before = stage1_bytes(model);
  Adam optimizer(model.postproc_parameters(), AdamOptions{config.lr});
  std::vector<EpochStats> log;
  try {
    log = run_epochs(model, images, config, optimizer, on_epoch, [&](const Tensor& batch, std::uint64_t) {
      ForwardResult r;
      {
        NoGradGuard no_grad;
        r = model.forward(batch, QuantizerMode::Round, 0);
      }
      const auto loss = mse(batch, model.postprocess(r.x_hat, r.z_s_hat));
      return std::tuple{loss, double(loss.item()), 0.0};
    });
  } catch (...) {
    for (std::size_t i = 0; i < frozen.size(); ++i) Tensor(frozen[i]).set_requires_grad(previous[i]);
    throw;
  }
  for (std::size_t i = 0; i < frozen.size(); ++i) Tensor(frozen[i]).set_requires_grad(previous[i]);
  if (stage1_bytes(model) != before) throw std::logic_error("train_stage2: stage-I parameters changed");
  return log;
}

double clip_grad_norm(const std::vector<Tensor>& params, double max_norm) {
  double sq = 0;
  for (const auto& t : params) {
    if (!t.has_grad()) continue;
    for (const float g : t.grad()) sq += double(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const float factor = static_cast<float>(max_norm / norm);
    for (auto t : params) {
      if (!t.has_grad()) continue;
      for (auto& g : t.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

Tensor dihedral(const Tensor& image, int transform) {
  if (transform < 0 || transform > 7) throw std::invalid_argument("dihedral: transform must be in 0..7");
  const Index n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
  const bool swap = transform & 4;
  const Index oh = swap ? w : h, ow = swap ? h : w;
  const auto src = image.data();
  std::vector<float> out(src.size());
  for (Index p = 0; p < n * c; ++p) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        Index sy = swap ? x : y, sx = swap ? y : x;
        if (transform & 1) sx = w - 1 - sx;
        if (transform & 2) sy = h - 1 - sy;
        out[(p * oh + y) * ow + x] = src[(p * h + sy) * w + sx];
      }
    }
  }
  return Tensor(Shape{n, c, oh, ow}, std::move(out));
}

Tensor downsample_half(const Tensor& image) {
  const Index n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
  const Index oh = h / 2, ow = w / 2;
  const auto src = image.data();
  std::vector<float> out(static_cast<std::size_t>(n * c * oh * ow));
  for (Index p = 0; p < n * c; ++p) {
    for (Index y = 0; y < oh; ++y) {
      for (Index x = 0; x < ow; ++x) {
        const float* r0 = &src[(p * h + 2 * y) * w + 2 * x];
        const float* r1 = r0 + w;
        out[(p * oh + y) * ow + x] = 0.25f * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  return Tensor(Shape{n, c, oh, ow}, std::move(out));
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file(path, model.parameters().to_bytes());
  const auto text = model.config().to_text();
  auto cfg_path = path;
  cfg_path += ".cfg";
  write_file(cfg_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path) {
  auto cfg_path = path;
  cfg_path += ".cfg";
  auto model = std::make_unique<Model>(ModelConfig::load(cfg_path));
  model->parameters().load_bytes(read_file(path));
  return model;
}

}  // namespace nsx
