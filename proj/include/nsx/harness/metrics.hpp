#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nsx/codec/pipeline.hpp"
#include "nsx/tensor/tensor.hpp"

namespace nsx {

inline constexpr double kPsnrCap = 99.0;

/// Mean squared error on the 0..255 scale of two [0, 1] images.
double mse_255(const Tensor& a, const Tensor& b);
/// 10 log10(255^2 / MSE_255); identical images report kPsnrCap.
double psnr(const Tensor& a, const Tensor& b);

struct RdPoint {
  std::string label;
  double bpp = 0;
  double psnr = 0;
};

/// Points ordered by strictly increasing bpp.
struct RdCurve {
  std::vector<RdPoint> points;

  /// Sorts by bpp; throws std::invalid_argument on repeated or non-finite rates.
  void normalize();
  /// Human-readable notes for points whose PSNR drops as rate grows.
  std::vector<std::string> warnings() const;
};

/// Bjontegaard delta rate of `test` against `anchor` in percent. Each curve's
/// log10(bpp) is fitted as a cubic in PSNR by least squares; the fits are
/// integrated over the shared PSNR interval. Negative means `test` needs less rate.
double bd_rate(RdCurve test, RdCurve anchor);

/// Per-image rate-distortion record.
struct RdReport {
  std::string image;
  double bpp_h = 0, bpp_s = 0, bpp_c = 0, bpp_header = 0, bpp_total = 0;
  double mse = 0;   // 0..255 scale, on the 8-bit reconstruction
  double psnr = 0;
  double loss = 0;          // round-mode R-D loss
  double loss_initial = 0;  // before finetuning; equals loss otherwise
  bool finetuned = false;
  int iterations = 0;
  std::string model;
};

/// Fills the rate fields from the container and the distortion fields from
/// the 8-bit reconstruction that decoding writes to disk.
RdReport make_report(const std::string& image_id, const Tensor& original, const EncodeResult& encoded);

/// "image,bpp,psnr,..." with the remaining report fields after the first three.
void write_report_csv(const std::filesystem::path& path, const std::vector<RdReport>& rows);
std::string report_csv(const std::vector<RdReport>& rows);

/// "image,bpp,psnr" rows, one per curve point.
void write_curve_csv(const std::filesystem::path& path, const RdCurve& curve);
std::string curve_csv(const RdCurve& curve);
/// Reads the bpp and psnr columns of any CSV with a header row naming them.
RdCurve read_curve_csv(const std::filesystem::path& path);
RdCurve parse_curve_csv(const std::string& text);

}  // namespace nsx
