#include "nsx/harness/cli.hpp"

#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "nsx/bitstream/container.hpp"
#include "nsx/harness/finetune.hpp"
#include "nsx/harness/image.hpp"
#include "nsx/harness/metrics.hpp"
#include "nsx/harness/train.hpp"

namespace nsx {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

// Keys outside the model and schedule: where data comes from and goes to.
struct TrainJob {
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;
  std::filesystem::path data, out, init;
};

TrainJob parse_train_job(const std::string& text, int stage) {
  TrainJob job;
  std::map<std::string, std::string> train_keys;
  bool model_keys = false;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "data") job.data = value;
    else if (key == "out") job.out = value;
    else if (key == "init") job.init = value;
    else if (key == "seed") {
      job.model.set(key, value);
      train_keys[key] = value;
    } else if (job.model.set(key, value)) {
      model_keys = true;
    } else {
      if (!TrainConfig().set(key, value)) throw UsageError("train config: unknown key '" + key + "'");
      train_keys[key] = value;
    }
  }
  // Milestones follow the epoch count unless given explicitly.
  int epochs = (stage == 1 ? TrainConfig::desk_stage1() : TrainConfig::desk_stage2()).epochs;
  if (const auto it = train_keys.find("epochs"); it != train_keys.end()) {
    TrainConfig probe;
    probe.set("epochs", it->second);
    epochs = probe.epochs;
  }
  job.train = stage == 1 ? TrainConfig::desk_stage1(epochs) : TrainConfig::desk_stage2(epochs);
  for (const auto& [key, value] : train_keys) job.train.set(key, value);
  job.train.stage = stage;
  if (model_keys && !job.init.empty()) throw UsageError("train config: model keys conflict with init=");
  job.model.validate();
  job.train.validate();
  return job;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_lock);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Options {
  int stage = 1;
  std::string config, data, out, init;
  std::vector<std::string> models;
  int finetune = 0;
  double finetune_lr = FinetuneOptions{}.lr;
  bool postprocess = false;
  std::string input, output, anchor, test, dir, prefix;
  unsigned jobs = 1;
  int count = 8;
  Index height = 64, width = 64;
  std::uint64_t seed = 1000;
};

int cmd_train(const Options& o, std::ostream& out) {
  auto job = parse_train_job(o.config.empty() ? std::string() : read_text(o.config), o.stage);
  if (!o.data.empty()) job.data = o.data;
  if (!o.out.empty()) job.out = o.out;
  if (!o.init.empty()) job.init = o.init;
  if (job.data.empty()) throw UsageError("train: no data directory (data= or --data)");
  if (job.out.empty()) throw UsageError("train: no output model path (out= or --out)");
  if (o.stage == 2 && job.init.empty()) throw UsageError("train: stage 2 needs a stage-1 model (init= or --init)");

  std::vector<Tensor> images;
  for (const auto& path : list_images(job.data)) images.push_back(load_image(path));
  if (images.empty()) throw UsageError("train: no .ppm images in " + job.data.string());
  auto model = job.init.empty() ? std::make_unique<Model>(job.model) : load_model(job.init);
  out << fmt::format("training stage {} on {} images for {} epochs\n", o.stage, images.size(), job.train.epochs);
  const auto on_epoch = [&](const EpochStats& s) {
    out << fmt::format("epoch {} loss {:.6f} mse {:.6f} bpp {:.4f} lr {:g}\n", s.epoch, s.loss, s.mse, s.bpp, s.lr);
  };
  try {
    if (o.stage == 1) train_stage1(*model, images, job.train, on_epoch);
    else train_stage2(*model, images, job.train, on_epoch);
  } catch (const DivergenceError&) {
    auto partial = job.out;
    partial += ".diverged";
    save_model(*model, partial);
    out << "parameters of the last finite epoch saved to " << partial.string() << "\n";
    throw;
  }
  save_model(*model, job.out);
  out << "saved " << job.out.string() << "\n";
  return kExitOk;
}

int cmd_encode(const Options& o, std::ostream& out) {
  const auto model = load_model(o.models.at(0));
  const auto image = load_image(o.input);
  EncodeResult encoded;
  double initial = 0;
  if (o.finetune > 0) {
    auto r = finetune_encode(*model, image, {.iterations = o.finetune, .lr = o.finetune_lr});
    encoded = std::move(r.encoded);
    initial = r.loss_initial;
  } else {
    encoded = encode_image(*model, image);
  }
  write_file(o.output, encoded.bytes);
  const auto report = make_report(o.input, image, encoded);
  out << fmt::format("{}x{} -> {} bytes, {:.4f} bpp, {:.3f} dB, loss {:.6f}", image.dim(3), image.dim(2),
                     encoded.bytes.size(), report.bpp_total, report.psnr, report.loss);
  if (o.finetune > 0) out << fmt::format(" (before finetuning {:.6f})", initial);
  out << "\n";
  return kExitOk;
}

int cmd_decode(const Options& o, std::ostream& out) {
  const auto model = load_model(o.models.at(0));
  const auto bytes = read_file(o.input);
  const auto decoded = decode_bytes(*model, bytes, o.postprocess);
  save_image(o.output, o.postprocess ? decoded.x_post : decoded.x_hat);
  out << fmt::format("{}x{} decoded to {}\n", decoded.header.width, decoded.header.height, o.output);
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const auto anchor = read_curve_csv(o.anchor);
  const auto test = read_curve_csv(o.test);
  for (const auto* c : {&anchor, &test}) {
    for (const auto& w : c->warnings()) out << "warning: " << w << "\n";
  }
  out << fmt::format("BD-rate {:+.4f}%\n", bd_rate(test, anchor));
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  const auto paths = list_images(o.dir);
  if (paths.empty()) throw UsageError("report: no .ppm images in " + o.dir);
  std::vector<Tensor> images;
  for (const auto& p : paths) images.push_back(load_image(p));
  std::vector<RdReport> rows;
  RdCurve curve;
  for (const auto& model_path : o.models) {
    const auto model = load_model(model_path);
    const auto label = std::filesystem::path(model_path).stem().string();
    std::vector<RdReport> part(images.size());
    parallel_for(images.size(), o.jobs, [&](std::size_t i) {
      const auto id = paths[i].filename().string();
      if (o.finetune > 0) {
        const auto r = finetune_encode(*model, images[i], {.iterations = o.finetune, .lr = o.finetune_lr});
        part[i] = make_report(id, images[i], r.encoded);
        part[i].loss_initial = r.loss_initial;
        part[i].finetuned = true;
        part[i].iterations = o.finetune;
      } else {
        part[i] = make_report(id, images[i], encode_image(*model, images[i]));
      }
      part[i].model = label;
    });
    double bpp = 0, psnr_sum = 0;
    for (const auto& r : part) {
      bpp += r.bpp_total;
      psnr_sum += r.psnr;
    }
    const double n = double(part.size());
    curve.points.push_back({label, bpp / n, psnr_sum / n});
    out << fmt::format("{}: {} images, mean {:.4f} bpp, {:.3f} dB\n", label, part.size(), bpp / n, psnr_sum / n);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  write_report_csv(o.prefix + "_report.csv", rows);
  write_curve_csv(o.prefix + "_curve.csv", curve);
  out << "wrote " << o.prefix << "_report.csv and " << o.prefix << "_curve.csv\n";
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  std::filesystem::create_directories(o.dir);
  for (int i = 0; i < o.count; ++i) {
    const auto path = std::filesystem::path(o.dir) / fmt::format("synth_{:04d}.ppm", i);
    save_image(path, synth_image(o.height, o.width, o.seed + static_cast<std::uint64_t>(i)));
  }
  out << fmt::format("wrote {} images of {}x{} to {}\n", o.count, o.width, o.height, o.dir);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-stream learned image codec"};
  app.require_subcommand(1);
  Options o;

  auto* train = app.add_subcommand("train", "Train a model (stage 1) or its post-processing network (stage 2)");
  train->add_option("--stage", o.stage, "Training stage")->check(CLI::IsMember({1, 2}));
  train->add_option("--config", o.config, "key=value file with model, schedule, data, out and init keys");
  train->add_option("--data", o.data, "Directory of .ppm training images");
  train->add_option("--out", o.out, "Output model path");
  train->add_option("--init", o.init, "Starting model path");

  auto* encode = app.add_subcommand("encode", "Compress an image");
  encode->add_option("--model", o.models, "Model path")->required()->expected(1);
  encode->add_option("--finetune", o.finetune, "Per-image encoder iterations")->check(CLI::NonNegativeNumber);
  encode->add_option("--finetune-lr", o.finetune_lr, "Per-image encoder learning rate")->check(CLI::PositiveNumber);
  encode->add_option("input", o.input, "Input .ppm")->required();
  encode->add_option("output", o.output, "Output bitstream")->required();

  auto* decode = app.add_subcommand("decode", "Reconstruct an image from a bitstream");
  decode->add_option("--model", o.models, "Model path")->required()->expected(1);
  decode->add_flag("--postprocess", o.postprocess, "Apply the post-processing network");
  decode->add_option("input", o.input, "Input bitstream")->required();
  decode->add_option("output", o.output, "Output .ppm")->required();

  auto* eval = app.add_subcommand("eval", "BD-rate of one R-D curve against another");
  eval->add_option("--anchor", o.anchor, "Anchor curve CSV")->required();
  eval->add_option("--test", o.test, "Test curve CSV")->required();

  auto* report = app.add_subcommand("report", "Per-image R-D report and R-D curve for a directory");
  report->add_option("dir", o.dir, "Directory of .ppm images")->required();
  report->add_option("--model", o.models, "Model paths, one curve point each")->required();
  report->add_option("--out", o.prefix, "Output prefix for <prefix>_report.csv and <prefix>_curve.csv")->required();
  report->add_option("--finetune", o.finetune, "Per-image encoder iterations")->check(CLI::NonNegativeNumber);
  report->add_option("--finetune-lr", o.finetune_lr, "Per-image encoder learning rate")->check(CLI::PositiveNumber);
  report->add_option("--jobs", o.jobs, "Images processed in parallel")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Write procedural test images");
  synth->add_option("dir", o.dir, "Output directory")->required();
  synth->add_option("--count", o.count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--height", o.height, "Image height")->check(CLI::PositiveNumber);
  synth->add_option("--width", o.width, "Image width")->check(CLI::PositiveNumber);
  synth->add_option("--seed", o.seed, "Seed of the first image");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(o, out);
    if (*encode) return cmd_encode(o, out);
    if (*decode) return cmd_decode(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*report) return cmd_report(o, out);
    return cmd_synth(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BitstreamError& e) {
    err << "error: corrupt bitstream: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const ModelMismatchError& e) {
    err << "error: " << e.what() << "\n";
    return kExitCorrupt;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace nsx
