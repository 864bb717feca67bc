#include "nsx/codec/model.hpp"

#include <cmath>

#include "nsx/tensor/ops.hpp"

namespace nsx {

namespace {

constexpr float kLeak = 0.1f;
constexpr int kAnalysisStages = 4;

// Distinct noise streams for the three quantised latents.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return Rng(seed).fork(stream).next(); }

GaussianPair split_params(const Tensor& raw, Index channels) {
  const auto mu = slice_channels(raw, 0, channels);
  const auto sigma = add_scalar(softplus(slice_channels(raw, channels, 2 * channels)), static_cast<float>(kSigmaMin));
  return {mu, sigma};
}

// Overwrites a freshly registered parameter's values.
void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (auto& v : t.mutable_data()) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace

RdTerms rd_loss(const Tensor& x, const Tensor& x_hat, const Tensor& lik_c, const Tensor& lik_s,
                const Tensor& lik_h, double lambda, double num_pixels) {
  if (!(num_pixels > 0)) throw std::invalid_argument("rd_loss: num_pixels must be positive");
  RdTerms t;
  t.pixels = num_pixels;
  const auto distortion = mse(x, x_hat);
  t.mse = distortion.item();
  auto rate = rate_bits(lik_c);
  t.bits_c = rate.item();
  if (lik_s.defined()) {
    const auto rs = rate_bits(lik_s);
    t.bits_s = rs.item();
    rate = add(rate, rs);
  }
  const auto rh = rate_bits(lik_h);
  t.bits_h = rh.item();
  rate = add(rate, rh);
  t.loss = add(scale(distortion, static_cast<float>(lambda * 255.0 * 255.0)),
               scale(rate, static_cast<float>(1.0 / num_pixels)));
  return t;
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.seed);
  const Index n = config_.n, m = config_.m, c = config_.content_channels(), k = config_.final_kernel;
  auto conv = [&](const std::string& name, Index cin, Index cout, Index kk, int stride, int pad) {
    return Conv2d(store_, name, cin, cout, kk, stride, pad, rng);
  };
  auto deconv = [&](const std::string& name, Index cin, Index cout) {
    return ConvTranspose2d(store_, name, cin, cout, 5, 2, 2, 1, rng);
  };

  for (int i = 0; i < kAnalysisStages; ++i) {
    const auto name = "analysis." + std::to_string(i);
    analysis_.push_back(conv(name + ".conv", i == 0 ? 3 : n, n, 5, 2, 2));
    analysis_gdn_.emplace_back(store_, name + ".gdn", n, false);
  }

  if (config_.has_syntax()) {
    Index cin = m;
    for (std::size_t i = 0; i < config_.syntax_widths.size(); ++i) {
      syntax_gen_.push_back(conv("syntax_gen." + std::to_string(i), cin, config_.syntax_widths[i], 3, 2, 1));
      cin = config_.syntax_widths[i];
    }
    const Index s = config_.syntax_length();
    weight_hidden_ = Dense(store_, "weight_gen.hidden", s, config_.generator_hidden, rng);
    weight_out_ = Dense(store_, "weight_gen.out", config_.generator_hidden, n * 3 * k * k, rng);
    // Start near an ordinary learned kernel: the bias carries a standard
    // transposed-conv init and the syntax-dependent part starts small.
    fill_uniform(weight_out_.weight, 0.1 * std::sqrt(3.0 / double(config_.generator_hidden)) / generator_gain(), rng);
    fill_uniform(weight_out_.bias, std::sqrt(3.0 / double(n * k * k)), rng);
  } else {
    static_final_ = store_.add("final.weight", fan_in_uniform({n, 3, k, k}, double(n * k * k), rng));
  }

  hyper_analysis_.push_back(conv("hyper_analysis.0", n, n, 5, 2, 2));
  hyper_analysis_.push_back(conv("hyper_analysis.1", n, config_.hyper_channels, 5, 2, 2));
  hyper_synthesis_.push_back(deconv("hyper_synthesis.0", config_.hyper_channels, n));
  hyper_synthesis_.push_back(deconv("hyper_synthesis.1", n, n));
  hyper_prior_ = make_factorized(store_, "hyper_prior", config_.hyper_channels, rng);

  if (config_.has_syntax()) {
    syntax_hidden_ = Dense(store_, "syntax_head.hidden", n, config_.context_hidden, rng);
    syntax_out_ = Dense(store_, "syntax_head.out", config_.context_hidden, 2 * config_.syntax_length(), rng);
  }

  context_ = MaskedConv2d(store_, "context.masked", c, 2 * c, 5, rng);
  const Index h = config_.context_hidden;
  fusion_.push_back(conv("context.fuse0", 2 * c + n, h, 1, 1, 0));
  fusion_.push_back(conv("context.fuse1", h, h, 1, 1, 0));
  fusion_.push_back(conv("context.fuse2", h, 2 * c, 1, 1, 0));

  for (int i = 0; i < kAnalysisStages; ++i) {
    const auto name = "synthesis." + std::to_string(i);
    synthesis_.push_back(deconv(name + ".deconv", i == 0 ? c : n, n));
    synthesis_igdn_.emplace_back(store_, name + ".igdn", n, true);
  }

  const Index w = config_.postproc_width;
  post_head_ = conv("post.head", 3, w, 3, 1, 1);
  for (Index g = 0; g < config_.postproc_groups; ++g) {
    ResGroup group;
    for (Index b = 0; b < config_.postproc_blocks; ++b) {
      const auto name = "post.group" + std::to_string(g) + ".block" + std::to_string(b);
      ResBlock block;
      block.conv1 = conv(name + ".conv1", w, w, 3, 1, 1);
      block.conv2 = conv(name + ".conv2", w, w, 3, 1, 1);
      const Index r = std::max<Index>(w / 4, 1);
      block.squeeze = Dense(store_, name + ".squeeze", w, r, rng);
      block.excite = Dense(store_, name + ".excite", r, w, rng);
      group.blocks.push_back(block);
    }
    group.tail = conv("post.group" + std::to_string(g) + ".tail", w, w, 3, 1, 1);
    post_groups_.push_back(group);
  }
  post_body_tail_ = conv("post.body_tail", w, w, 3, 1, 1);
  // The output layer starts at zero so the enhanced image equals the input.
  if (config_.has_syntax()) {
    post_weight_hidden_ = Dense(store_, "post.weight_gen.hidden", config_.syntax_length(), config_.generator_hidden, rng);
    post_weight_out_ = Dense(store_, "post.weight_gen.out", config_.generator_hidden, w * 3 * 3 * 3, rng);
    fill_uniform(post_weight_out_.weight, 0.0, rng);
  } else {
    post_static_final_ = store_.add("post.final.weight", Tensor(Shape{w, 3, 3, 3}));
  }
}

std::unique_ptr<Model> Model::clone() const {
  auto copy = std::make_unique<Model>(config_);
  copy->store_.copy_values_from(store_);
  return copy;
}

std::vector<Tensor> Model::stage1_parameters() const {
  std::vector<Tensor> out;
  for (const auto& p : store_.parameters()) {
    if (!p.name.starts_with("post.")) out.push_back(p.tensor);
  }
  return out;
}

std::vector<Tensor> Model::postproc_parameters() const {
  const std::vector<std::string> prefix{"post."};
  return store_.select(prefix);
}

Tensor Model::analysis(const Tensor& x) const {
  // Centred input; the synthesis output stays in image units.
  Tensor h = add_scalar(x, -0.5f);
  for (int i = 0; i < kAnalysisStages; ++i) h = analysis_gdn_[i](analysis_[i](h));
  return h;
}

Tensor Model::syntax_generate(const Tensor& features) const {
  std::vector<Tensor> pooled;
  Tensor h = features;
  for (std::size_t i = 0; i < syntax_gen_.size(); ++i) {
    h = syntax_gen_[i](h);
    pooled.push_back(global_avg_pool(h));
    if (i + 1 < syntax_gen_.size()) h = leaky_relu(h, kLeak);
  }
  return pooled.size() == 1 ? pooled[0] : concat_channels(pooled);
}

Tensor Model::generate(const Dense& hidden, const Dense& out, const Tensor& z_s_hat, Shape kernel_shape) const {
  const auto flat = out(scale(leaky_relu(hidden(z_s_hat), kLeak), static_cast<float>(generator_gain())));
  Shape shape{z_s_hat.dim(0)};
  shape.insert(shape.end(), kernel_shape.begin(), kernel_shape.end());
  return reshape(flat, shape);
}

Tensor Model::final_kernels(const Tensor& z_s_hat) const {
  if (!config_.has_syntax()) return static_final_;
  const Index k = config_.final_kernel;
  return generate(weight_hidden_, weight_out_, z_s_hat, Shape{config_.n, 3, k, k});
}

Tensor Model::hyper_analysis(const Tensor& y) const {
  return hyper_analysis_[1](relu(hyper_analysis_[0](abs(y))));
}

Tensor Model::hyper_synthesis(const Tensor& z_h_hat) const {
  return relu(hyper_synthesis_[1](relu(hyper_synthesis_[0](z_h_hat))));
}

GaussianPair Model::syntax_params(const Tensor& psi) const {
  if (!config_.has_syntax()) throw std::logic_error("syntax_params: baseline model has no syntax stream");
  const auto raw = syntax_out_(relu(syntax_hidden_(global_avg_pool(psi))));
  return split_params(raw, config_.syntax_length());
}

Tensor Model::fuse_context(const Tensor& ctx, const Tensor& psi) const {
  Tensor h = concat_channels(std::vector<Tensor>{ctx, psi});
  for (std::size_t i = 0; i < fusion_.size(); ++i) {
    h = fusion_[i](h);
    if (i + 1 < fusion_.size()) h = relu(h);
  }
  return h;
}

GaussianPair Model::content_params(const Tensor& z_c_hat, const Tensor& psi) const {
  return split_params(fuse_context(context_(z_c_hat), psi), config_.content_channels());
}

void Model::content_params_at(const Tensor& z_c_hat, const Tensor& psi, Index y, Index x, std::span<float> mu,
                              std::span<float> sigma) const {
  const Index c = config_.content_channels(), n = config_.n;
  if (static_cast<Index>(mu.size()) != c || static_cast<Index>(sigma.size()) != c) {
    throw ShapeError("content_params_at: output spans must hold one value per content channel");
  }
  std::vector<float> ctx(static_cast<std::size_t>(2 * c));
  masked_conv2d_at(z_c_hat, context_.weight, context_.bias, 0, y, x, std::span<float>(ctx));
  const Index h = psi.dim(2), w = psi.dim(3);
  std::vector<float> here(static_cast<std::size_t>(n));
  const auto pv = psi.data();
  for (Index ch = 0; ch < n; ++ch) here[ch] = pv[(ch * h + y) * w + x];
  const auto params = split_params(
      fuse_context(Tensor(Shape{1, 2 * c, 1, 1}, std::move(ctx)), Tensor(Shape{1, n, 1, 1}, std::move(here))), c);
  for (Index ch = 0; ch < c; ++ch) {
    mu[ch] = params.mu.at(ch);
    sigma[ch] = params.sigma.at(ch);
  }
}

Tensor Model::synthesis(const Tensor& z_c_hat, const Tensor& kernels) const {
  Tensor h = z_c_hat;
  for (int i = 0; i < kAnalysisStages; ++i) h = synthesis_igdn_[i](synthesis_[i](h));
  const int pad = static_cast<int>(config_.final_kernel / 2);
  return apply_dynamic_deconv(h, kernels, 1, pad);
}

Tensor Model::postprocess(const Tensor& x_hat, const Tensor& z_s_hat) const {
  const Tensor head = post_head_(x_hat);
  Tensor body = head;
  for (const auto& group : post_groups_) {
    Tensor g = body;
    for (const auto& block : group.blocks) {
      const auto r = block.conv2(relu(block.conv1(g)));
      const auto attention = sigmoid(block.excite(relu(block.squeeze(global_avg_pool(r)))));
      g = add(g, mul_prefix(r, attention));
    }
    body = add(body, group.tail(g));
  }
  body = add(head, post_body_tail_(body));
  const Tensor kernels = config_.has_syntax()
                             ? generate(post_weight_hidden_, post_weight_out_, z_s_hat, Shape{config_.postproc_width, 3, 3, 3})
                             : post_static_final_;
  return clamp(add(x_hat, apply_dynamic_deconv(body, kernels, 1, 1)), 0.0f, 1.0f);
}

ForwardResult Model::forward(const Tensor& x, QuantizerMode mode, std::uint64_t seed) const {
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) % 64 != 0 || x.dim(3) % 64 != 0) {
    throw ShapeError("forward: expected [B,3,H,W] with H, W multiples of 64, got " + to_string(x.shape()));
  }
  ForwardResult r;
  const Index m = config_.m;
  r.y = analysis(x);
  r.z_c_hat = quantize(m > 0 ? slice_channels(r.y, m, config_.n) : r.y, mode, stream_seed(seed, 0));
  if (config_.has_syntax()) {
    r.z_s_hat = quantize(syntax_generate(slice_channels(r.y, 0, m)), mode, stream_seed(seed, 1));
  }
  r.z_h_hat = quantize(hyper_analysis(r.y), mode, stream_seed(seed, 2));
  r.lik_h = factorized_likelihood(r.z_h_hat, hyper_prior_);
  r.psi = hyper_synthesis(r.z_h_hat);
  r.content = content_params(r.z_c_hat, r.psi);
  r.lik_c = gaussian_likelihood(r.z_c_hat, r.content.mu, r.content.sigma);
  if (config_.has_syntax()) {
    r.syntax = syntax_params(r.psi);
    r.lik_s = gaussian_likelihood(r.z_s_hat, r.syntax.mu, r.syntax.sigma);
  }
  r.x_hat = synthesis(r.z_c_hat, final_kernels(r.z_s_hat));
  return r;
}

}  // namespace nsx
