#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gmpo/telemetry.hpp"

namespace gmpo {

// Metric columns addressable by the report command.
std::vector<std::string> telemetry_metric_names();

// Extracts one named column; throws listing the available columns.
std::vector<double> extract_metric(std::span<const StepTelemetry> series,
                                   const std::string& name);

// Trailing moving average over the W values ending at each position; shorter
// prefixes average what is available. W = 1 is the identity.
std::vector<double> moving_average(std::span<const double> values, int window);

// Two-column (step, value) file, tab-separated, plot-ready.
void write_series(const std::filesystem::path& path,
                  std::span<const double> values);

// Three-column (step, min, max) envelope file for the ratio metrics.
void write_envelope(const std::filesystem::path& path,
                    std::span<const double> lo, std::span<const double> hi);

}  // namespace gmpo
