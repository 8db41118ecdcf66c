#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tagflow/eval.hpp"

namespace tagflow {

inline constexpr const char* kMetricsHeader =
    "method,frame,slice,ssim,corr,median_epe_mm,max_epe_mm,jump_fraction";

// slice -1 is written as "volume"; numbers use %.17g, missing values "nan".
std::string format_metrics_csv(std::span<const MetricRow> rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRow> rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

// Binary 8-bit greyscale, lo -> 0 and hi -> 255, highest row index at the top.
void write_pgm(const std::filesystem::path& path, const Slice2D& slice, double lo, double hi);

// Slice-averaged SSIM and CORR against frame, one line per method, two
// panels side by side. Uses only the volume rows. A dashed marker is drawn
// at `marker_frame` when given.
std::string render_svg_chart(std::span<const MetricRow> rows, std::optional<int> marker_frame = std::nullopt);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace tagflow
