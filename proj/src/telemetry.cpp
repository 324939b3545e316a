#include "gmpo/telemetry.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace gmpo {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{})
    throw std::runtime_error("telemetry csv: bad number '" + s + "'");
  return v;
}

}  // namespace

std::pair<double, double> ratio_envelope(
    std::span<const std::vector<double>> new_logps_per_rollout,
    std::span<const Rollout* const> rollouts) {
  if (rollouts.empty() || new_logps_per_rollout.size() != rollouts.size())
    throw std::invalid_argument("ratio_envelope: empty or mismatched minibatch");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const Rollout& r = *rollouts[i];
    const auto& lps = new_logps_per_rollout[i];
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      if (!r.mask[t]) continue;
      const double d = lps[t] - r.old_logps[t];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (lo > hi)
    throw std::invalid_argument("ratio_envelope: no valid tokens");
  return {lo, hi};
}

double kl_estimate(const PolicyParams& current, const PolicyParams& ref,
                   std::span<const Rollout* const> rollouts) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const Rollout* r : rollouts) {
    for (std::size_t t = 0; t < r->tokens.size(); ++t) {
      if (!r->mask[t]) continue;
      const int bucket = r->buckets[t];
      acc += log_prob(current, bucket, r->tokens[t]) -
             log_prob(ref, bucket, r->tokens[t]);
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

void write_csv(std::span<const StepTelemetry> series,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("telemetry: cannot open for write: " + path.string());
  out << kTelemetryHeader << '\n';
  for (const auto& s : series) {
    out << s.round << ',' << s.update << ',' << format_double(s.ratio_log_min)
        << ',' << format_double(s.ratio_log_max) << ','
        << format_double(s.mean_entropy) << ',' << format_double(s.kl_ref)
        << ',' << format_double(s.mean_reward) << ','
        << format_double(s.clip_fraction) << ','
        << format_double(s.objective_value) << '\n';
  }
  if (!out)
    throw std::runtime_error("telemetry: write failed: " + path.string());
}

std::vector<StepTelemetry> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("telemetry: cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kTelemetryHeader)
    throw std::runtime_error("telemetry: bad header in " + path.string());

  std::vector<StepTelemetry> series;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9)
      throw std::runtime_error("telemetry: bad row in " + path.string());
    StepTelemetry s;
    s.round = static_cast<int>(parse_double(cells[0]));
    s.update = static_cast<int>(parse_double(cells[1]));
    s.ratio_log_min = parse_double(cells[2]);
    s.ratio_log_max = parse_double(cells[3]);
    s.mean_entropy = parse_double(cells[4]);
    s.kl_ref = parse_double(cells[5]);
    s.mean_reward = parse_double(cells[6]);
    s.clip_fraction = parse_double(cells[7]);
    s.objective_value = parse_double(cells[8]);
    series.push_back(s);
  }
  return series;
}

}  // namespace gmpo
