#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "noisebench/dataset.hpp"
#include "noisebench/harness.hpp"
#include "noisebench/perturb.hpp"

namespace noisebench {

inline constexpr std::uint32_t kDefaultTableLevels[] = {0, 10, 40, 100, 200};

/// Header "attack,level,rep,n,correct,accuracy"; rows in (kind, level, rep)
/// order; accuracy with 6 decimals; LF endings.
std::string to_csv(const AccuracyGrid& grid);

/// Inverse of to_csv. The plan echo is reconstructed from the rows (no seed).
/// Throws FormatError on malformed or empty input.
AccuracyGrid parse_csv(std::string_view text);

/// Stable-key-order JSON mirror of the grid, with per-(kind, level) summary.
std::string to_json(const AccuracyGrid& grid);

/// Fixed-width table: one row per requested level, columns WtB BtW RPI EtA
/// (those present in the summary), percentages with two decimals. Throws
/// ContractViolation naming a requested level the summary lacks.
std::string render_table(const Summary& summary,
                         std::span<const std::uint32_t> levels = kDefaultTableLevels);

/// SVG 1.1 line chart of mean accuracy (%) against attack count for one
/// attack kind, one polyline per series.
std::string render_svg_lines(std::span<const Summary> series, AttackKind kind);

/// All kinds of one summary in a single chart, one polyline per kind.
std::string render_svg_combined(const Summary& summary);

/// Binary PGM (P5, maxval 255).
std::string encode_pgm(const GrayImage& image);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

struct SamplePair {
  std::size_t index = 0;
  std::filesystem::path before;
  std::filesystem::path after;
};

/// Writes before/after PGM pairs for the first `count` images. Image i is
/// perturbed with seed derive_seed(seed, kind, spec.count, 0, i).
std::vector<SamplePair> dump_samples(const ImageSet& images, const AttackSpec& spec, std::uint64_t seed,
                                     std::size_t count, const std::filesystem::path& out_dir);

struct ReportBundle {
  std::filesystem::path csv;
  std::filesystem::path json;
  std::filesystem::path table;
  std::vector<std::filesystem::path> svgs;  // one per kind, then the combined chart
  std::string table_text;
};

/// Writes grid.csv, grid.json, table.txt, accuracy_<kind>.svg and accuracy_all.svg.
ReportBundle write_report(const AccuracyGrid& grid, const std::filesystem::path& out_dir,
                          std::span<const std::uint32_t> table_levels = kDefaultTableLevels);

}  // namespace noisebench
