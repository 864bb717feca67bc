#include "nsx/harness/finetune.hpp"

#include <limits>
#include <stdexcept>

#include "nsx/tensor/adam.hpp"

namespace nsx {

namespace {

std::vector<std::vector<float>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<float>> out;
  for (const auto& t : params) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void restore(std::vector<Tensor>& params, const std::vector<std::vector<float>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(), params[i].mutable_data().begin());
  }
}

}  // namespace

FinetuneResult finetune_encode(const Model& model, const Tensor& image, const FinetuneOptions& options) {
  if (options.iterations < 0) throw std::invalid_argument("finetune: iterations must be >= 0");
  auto local = model.clone();
  std::vector<Tensor> analysis;
  for (const auto& p : local->parameters().parameters()) {
    auto t = p.tensor;
    const bool trainable = p.name.starts_with("analysis.");
    t.set_requires_grad(trainable);
    if (trainable) analysis.push_back(t);
  }
  const auto x = reflect_pad(image);
  const auto& cfg = local->config();
  const double pixels = double(x.dim(2) * x.dim(3));
  Adam optimizer(analysis, AdamOptions{options.lr});

  FinetuneResult result;
  double best = std::numeric_limits<double>::infinity();
  auto best_values = snapshot(analysis);
  auto consider = [&](double loss, int iteration) {
    result.trace.push_back(loss);
    if (loss < best) {
      best = loss;
      result.best_iteration = iteration;
      best_values = snapshot(analysis);
    }
  };
  auto round_loss = [&] {
    NoGradGuard no_grad;
    const auto r = local->forward(x, QuantizerMode::Round, 0);
    return double(rd_loss(x, r.x_hat, r.lik_c, r.lik_s, r.lik_h, cfg.lambda, pixels).loss.item());
  };

  for (int it = 0; it < options.iterations; ++it) {
    optimizer.zero_grad();
    const auto r = local->forward(x, options.mode, options.seed + static_cast<std::uint64_t>(it));
    const auto t = rd_loss(x, r.x_hat, r.lik_c, r.lik_s, r.lik_h, cfg.lambda, pixels);
    // The straight-through forward pass is the round-mode pass.
    consider(options.mode == QuantizerMode::StraightThrough ? double(t.loss.item()) : round_loss(), it);
    t.loss.backward();
    optimizer.step();
  }
  consider(round_loss(), options.iterations);

  restore(analysis, best_values);
  result.encoded = encode_image(*local, image);
  result.loss_initial = result.trace.front();
  result.loss_final = result.encoded.rd.loss.item();
  return result;
}

}  // namespace nsx
