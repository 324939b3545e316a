#include "gmpo/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gmpo {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::string> telemetry_metric_names() {
  return {"ratio_log_min", "ratio_log_max", "mean_entropy",   "kl_ref",
          "mean_reward",   "clip_fraction", "objective_value"};
}

std::vector<double> extract_metric(std::span<const StepTelemetry> series,
                                   const std::string& name) {
  std::vector<double> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    if (name == "ratio_log_min") out.push_back(s.ratio_log_min);
    else if (name == "ratio_log_max") out.push_back(s.ratio_log_max);
    else if (name == "mean_entropy") out.push_back(s.mean_entropy);
    else if (name == "kl_ref") out.push_back(s.kl_ref);
    else if (name == "mean_reward") out.push_back(s.mean_reward);
    else if (name == "clip_fraction") out.push_back(s.clip_fraction);
    else if (name == "objective_value") out.push_back(s.objective_value);
    else {
      std::ostringstream msg;
      msg << "unknown metric '" << name << "'; available:";
      for (const auto& m : telemetry_metric_names()) msg << ' ' << m;
      throw std::invalid_argument(msg.str());
    }
  }
  return out;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window >= 1");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t w = std::min<std::size_t>(i + 1, window);
    double acc = 0.0;
    for (std::size_t j = i + 1 - w; j <= i; ++j) acc += values[j];
    out[i] = acc / static_cast<double>(w);
  }
  return out;
}

void write_series(const std::filesystem::path& path,
                  std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("report: cannot write " + path.string());
  for (std::size_t i = 0; i < values.size(); ++i)
    out << i << '\t' << format_double(values[i]) << '\n';
}

void write_envelope(const std::filesystem::path& path,
                    std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size())
    throw std::invalid_argument("envelope: min/max length mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("report: cannot write " + path.string());
  for (std::size_t i = 0; i < lo.size(); ++i)
    out << i << '\t' << format_double(lo[i]) << '\t' << format_double(hi[i])
        << '\n';
}

}  // namespace gmpo
