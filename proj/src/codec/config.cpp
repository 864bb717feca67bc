#include "nsx/codec/config.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nsx {

int lambda_preset_index(double lambda) {
  for (std::size_t i = 0; i < kLambdaPresets.size(); ++i) {
    if (std::abs(kLambdaPresets[i] - lambda) <= 1e-12 * kLambdaPresets[i]) return static_cast<int>(i);
  }
  return -1;
}

Index ModelConfig::syntax_length() const {
  return has_syntax() ? std::accumulate(syntax_widths.begin(), syntax_widths.end(), Index{0}) : 0;
}

std::uint16_t ModelConfig::model_id() const {
  const int i = lambda_preset_index(lambda);
  return i < 0 ? std::uint16_t{0xFFFF} : static_cast<std::uint16_t>(i);
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("model config: ") + what);
  };
  require(n > 0, "n must be positive");
  require(m >= 0 && m < n, "m must satisfy 0 <= m < n");
  require(hyper_channels > 0, "hyper_channels must be positive");
  require(!has_syntax() || !syntax_widths.empty(), "syntax_widths must be nonempty when m > 0");
  for (Index w : syntax_widths) require(w > 0, "syntax widths must be positive");
  require(final_kernel > 0 && final_kernel % 2 == 1, "final_kernel must be odd");
  require(generator_hidden > 0 && context_hidden > 0, "hidden widths must be positive");
  require(postproc_width > 0 && postproc_groups >= 0 && postproc_blocks > 0, "invalid post-processing shape");
  require(lambda > 0 && std::isfinite(lambda), "lambda must be positive");
  require(n <= 0xFFFF && syntax_length() <= 0xFFFF, "n and syntax length must fit 16 bits");
}

ModelConfig ModelConfig::desk(double lambda) {
  ModelConfig c;
  c.lambda = lambda;
  return c;
}

ModelConfig ModelConfig::full_low_rate(double lambda) {
  ModelConfig c;
  c.n = 192;
  c.m = 16;
  c.hyper_channels = 192;
  c.syntax_widths = {16, 16, 16};
  c.context_hidden = 384;
  c.postproc_width = 64;
  c.postproc_groups = 4;
  c.desk_scale = false;
  c.lambda = lambda;
  return c;
}

ModelConfig ModelConfig::full_high_rate(double lambda) {
  ModelConfig c = full_low_rate(lambda);
  c.n = 384;
  c.m = 32;
  c.hyper_channels = 384;
  c.syntax_widths = {32, 32, 32};
  c.context_hidden = 768;
  c.postproc_groups = 6;
  return c;
}

std::string ModelConfig::to_text() const {
  std::string widths;
  for (std::size_t i = 0; i < syntax_widths.size(); ++i) widths += (i ? "," : "") + std::to_string(syntax_widths[i]);
  std::string out;
  out += fmt::format("n={}\nm={}\nhyper_channels={}\nsyntax_widths={}\n", n, m, hyper_channels, widths);
  out += fmt::format("final_kernel={}\ngenerator_hidden={}\ncontext_hidden={}\n", final_kernel, generator_hidden,
                     context_hidden);
  out += fmt::format("postproc_width={}\npostproc_groups={}\npostproc_blocks={}\n", postproc_width, postproc_groups,
                     postproc_blocks);
  out += fmt::format("lambda={}\ndesk_scale={}\nseed={}\n", lambda, desk_scale ? 1 : 0, seed);
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(fmt::format("line {}: expected key=value", number));
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  try {
    if (key == "n") n = std::stoll(value);
    else if (key == "m") m = std::stoll(value);
    else if (key == "hyper_channels") hyper_channels = std::stoll(value);
    else if (key == "syntax_widths") {
      syntax_widths.clear();
      std::istringstream parts(value);
      std::string item;
      while (std::getline(parts, item, ',')) syntax_widths.push_back(std::stoll(item));
    } else if (key == "final_kernel") final_kernel = std::stoll(value);
    else if (key == "generator_hidden") generator_hidden = std::stoll(value);
    else if (key == "context_hidden") context_hidden = std::stoll(value);
    else if (key == "postproc_width") postproc_width = std::stoll(value);
    else if (key == "postproc_groups") postproc_groups = std::stoll(value);
    else if (key == "postproc_blocks") postproc_blocks = std::stoll(value);
    else if (key == "lambda") lambda = std::stod(value);
    else if (key == "desk_scale") desk_scale = std::stoi(value) != 0;
    else if (key == "seed") seed = std::stoull(value);
    else return false;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("model config: bad value for '" + key + "': " + value);
  }
  return true;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig c;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (!c.set(key, value)) throw std::invalid_argument("model config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

void ModelConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  out << to_text();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str());
}

}  // namespace nsx
