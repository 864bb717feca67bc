#include "nsx/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "nsx/harness/image.hpp"

namespace nsx {

namespace {

// Cubic fit of log10(bpp) against PSNR in centred, scaled coordinates.
struct CubicFit {
  double centre = 0, scale = 1;
  Eigen::Vector4d coef;

  double integral(double lo, double hi) const {
    auto antiderivative = [&](double p) {
      const double t = (p - centre) / scale;
      return scale * (coef[0] * t + coef[1] * t * t / 2 + coef[2] * t * t * t / 3 + coef[3] * t * t * t * t / 4);
    };
    return antiderivative(hi) - antiderivative(lo);
  }
};

CubicFit fit_log_rate(const RdCurve& curve) {
  const auto n = static_cast<Eigen::Index>(curve.points.size());
  CubicFit fit;
  double lo = curve.points[0].psnr, hi = lo;
  for (const auto& p : curve.points) {
    lo = std::min(lo, p.psnr);
    hi = std::max(hi, p.psnr);
  }
  fit.centre = (lo + hi) / 2;
  fit.scale = hi > lo ? (hi - lo) / 2 : 1.0;
  Eigen::MatrixXd a(n, 4);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (curve.points[i].psnr - fit.centre) / fit.scale;
    a(i, 0) = 1;
    a(i, 1) = t;
    a(i, 2) = t * t;
    a(i, 3) = t * t * t;
    b[i] = std::log10(curve.points[i].bpp);
  }
  fit.coef = a.colPivHouseholderQr().solve(b);
  return fit;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(',', start);
    std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(std::move(cell));
    if (end == std::string::npos) return out;
    start = end + 1;
  }
}

std::string clean_label(std::string s) {
  std::replace(s.begin(), s.end(), ',', '_');
  std::replace(s.begin(), s.end(), '\n', '_');
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

double mse_255(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("psnr: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double acc = 0;
  const auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = 255.0 * (double(da[i]) - double(db[i]));
    acc += d * d;
  }
  return da.empty() ? 0.0 : acc / double(da.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse_255(a, b);
  if (m <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m));
}

void RdCurve::normalize() {
  for (const auto& p : points) {
    if (!std::isfinite(p.bpp) || !std::isfinite(p.psnr) || p.bpp <= 0) {
      throw std::invalid_argument(fmt::format("rd curve: invalid point ({}, {})", p.bpp, p.psnr));
    }
  }
  std::stable_sort(points.begin(), points.end(), [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].bpp == points[i - 1].bpp) {
      throw std::invalid_argument(fmt::format("rd curve: repeated rate {}", points[i].bpp));
    }
  }
}

std::vector<std::string> RdCurve::warnings() const {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].psnr < points[i - 1].psnr) {
      out.push_back(fmt::format("PSNR falls from {:.4f} to {:.4f} dB as bpp rises to {:.6f}", points[i - 1].psnr,
                                points[i].psnr, points[i].bpp));
    }
  }
  return out;
}

double bd_rate(RdCurve test, RdCurve anchor) {
  test.normalize();
  anchor.normalize();
  if (test.points.size() < 4 || anchor.points.size() < 4) {
    throw std::invalid_argument("bd_rate: each curve needs at least 4 points");
  }
  auto range = [](const RdCurve& c) {
    double lo = c.points[0].psnr, hi = lo;
    for (const auto& p : c.points) {
      lo = std::min(lo, p.psnr);
      hi = std::max(hi, p.psnr);
    }
    return std::pair{lo, hi};
  };
  const auto [tl, th] = range(test);
  const auto [al, ah] = range(anchor);
  const double lo = std::max(tl, al), hi = std::min(th, ah);
  if (!(hi > lo)) throw std::invalid_argument("bd_rate: curves share no PSNR interval");
  const double avg = (fit_log_rate(test).integral(lo, hi) - fit_log_rate(anchor).integral(lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, avg) - 1.0);
}

RdReport make_report(const std::string& image_id, const Tensor& original, const EncodeResult& encoded) {
  RdReport r;
  r.image = image_id;
  const auto& h = encoded.container.header;
  const auto rate = bpp_report(encoded.container, h.width, h.height);
  r.bpp_h = rate.bpp_hyper;
  r.bpp_s = rate.bpp_syntax;
  r.bpp_c = rate.bpp_content;
  r.bpp_header = rate.bpp_header;
  r.bpp_total = rate.bpp_total;
  const auto recon = quantize_8bit(encoded.x_hat);
  r.mse = mse_255(quantize_8bit(original), recon);
  r.psnr = psnr(quantize_8bit(original), recon);
  r.loss = encoded.rd.loss.item();
  r.loss_initial = r.loss;
  return r;
}

std::string report_csv(const std::vector<RdReport>& rows) {
  std::string out = "image,bpp,psnr,bpp_h,bpp_s,bpp_c,bpp_header,mse,loss,loss_initial,finetuned,iterations,model\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.6f},{:.4f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{},{}\n",
                       clean_label(r.image), r.bpp_total, r.psnr, r.bpp_h, r.bpp_s, r.bpp_c, r.bpp_header, r.mse,
                       r.loss, r.loss_initial, r.finetuned ? 1 : 0, r.iterations, clean_label(r.model));
  }
  return out;
}

void write_report_csv(const std::filesystem::path& path, const std::vector<RdReport>& rows) {
  write_text(path, report_csv(rows));
}

std::string curve_csv(const RdCurve& curve) {
  std::string out = "image,bpp,psnr\n";
  for (const auto& p : curve.points) out += fmt::format("{},{:.6f},{:.4f}\n", clean_label(p.label), p.bpp, p.psnr);
  return out;
}

void write_curve_csv(const std::filesystem::path& path, const RdCurve& curve) { write_text(path, curve_csv(curve)); }

RdCurve parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty file");
  const auto header = split_csv_line(line);
  auto column = [&](const char* name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument(fmt::format("csv: no '{}' column", name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto ib = column("bpp"), ip = column("psnr");
  const auto il = std::find(header.begin(), header.end(), "image") - header.begin();
  RdCurve curve;
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw std::invalid_argument(fmt::format("csv: line {} has wrong width", number));
    RdPoint p;
    try {
      p.bpp = std::stod(cells[ib]);
      p.psnr = std::stod(cells[ip]);
    } catch (const std::logic_error&) {
      throw std::invalid_argument(fmt::format("csv: line {} is not numeric", number));
    }
    if (il < static_cast<long>(cells.size())) p.label = cells[static_cast<std::size_t>(il)];
    curve.points.push_back(p);
  }
  return curve;
}

RdCurve read_curve_csv(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_curve_csv(std::string(bytes.begin(), bytes.end()));
}

}  // namespace nsx
