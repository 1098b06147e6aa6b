#include "noisebench/perturb.hpp"

#include <cmath>

#include <fmt/format.h>

#include "noisebench/errors.hpp"

namespace noisebench {
namespace {

constexpr std::uint8_t kBrightThreshold = 127;  // bright means b > 127
constexpr std::uint8_t kDarkLimit = 100;        // BtW eligibility: b < 100

std::uint8_t clamp_truncated(double value) noexcept {
  const double t = std::trunc(value);
  if (!(t > 0.0)) return 0;  // also catches NaN
  if (t >= 255.0) return 255;
  return static_cast<std::uint8_t>(t);
}

bool is_bright(std::uint8_t b) noexcept { return b > kBrightThreshold; }

void collect_edges(const LogicalGrid& grid, std::vector<int>& out) {
  const int rows = grid.rows();
  const int cols = grid.cols();
  const auto v = grid.values();
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const bool self = is_bright(v[static_cast<std::size_t>(r) * cols + c]);
      bool edge = false;
      for (int dr = -1; dr <= 1 && !edge; ++dr) {
        const int nr = r + dr;
        if (nr < 0 || nr >= rows) continue;
        for (int dc = -1; dc <= 1; ++dc) {
          const int nc = c + dc;
          if ((dr == 0 && dc == 0) || nc < 0 || nc >= cols) continue;
          if (is_bright(v[static_cast<std::size_t>(nr) * cols + nc]) != self) {
            edge = true;
            break;
          }
        }
      }
      if (edge) out.push_back(r * cols + c);
    }
  }
}

template <class Pred>
void collect_if(const LogicalGrid& grid, std::vector<int>& out, Pred pred) {
  const auto v = grid.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (pred(v[i])) out.push_back(static_cast<int>(i));
  }
}

void collect_eligible(const LogicalGrid& grid, AttackKind kind, std::vector<int>& out) {
  out.clear();
  switch (kind) {
    case AttackKind::RandomPixelInvert:
      collect_if(grid, out, [](std::uint8_t) { return true; });
      break;
    case AttackKind::WhiteToBlack:
      collect_if(grid, out, [](std::uint8_t b) { return b > 0; });
      break;
    case AttackKind::BlackToWhite:
      collect_if(grid, out, [](std::uint8_t b) { return b < kDarkLimit; });
      break;
    case AttackKind::EdgeToAltered:
      collect_edges(grid, out);
      break;
  }
}

std::vector<Block> to_blocks(const LogicalGrid& grid, const std::vector<int>& indices) {
  std::vector<Block> blocks;
  blocks.reserve(indices.size());
  for (int idx : indices) blocks.push_back({idx / grid.cols(), idx % grid.cols()});
  return blocks;
}

std::optional<Block> step_with(LogicalGrid& grid, AttackKind kind, double c, SplitMix64& rng,
                               std::vector<int>& scratch) {
  collect_eligible(grid, kind, scratch);
  if (scratch.empty()) return std::nullopt;
  const int idx = scratch[uniform_below(rng, scratch.size())];
  const Block block{idx / grid.cols(), idx % grid.cols()};
  grid.set(block, attacked_value(kind, grid.at(block), c));
  return block;
}

}  // namespace

std::string_view short_name(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::RandomPixelInvert: return "rpi";
    case AttackKind::WhiteToBlack: return "wtb";
    case AttackKind::BlackToWhite: return "btw";
    case AttackKind::EdgeToAltered: return "eta";
  }
  return "?";
}

std::string_view table_label(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::RandomPixelInvert: return "RPI";
    case AttackKind::WhiteToBlack: return "WtB";
    case AttackKind::BlackToWhite: return "BtW";
    case AttackKind::EdgeToAltered: return "EtA";
  }
  return "?";
}

std::string_view display_name(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::RandomPixelInvert: return "Random Pixel Invert";
    case AttackKind::WhiteToBlack: return "White to Black";
    case AttackKind::BlackToWhite: return "Black to White";
    case AttackKind::EdgeToAltered: return "Edge to Altered";
  }
  return "?";
}

std::optional<AttackKind> parse_attack_kind(std::string_view name) noexcept {
  for (AttackKind kind : kAllAttackKinds) {
    if (name == short_name(kind)) return kind;
  }
  return std::nullopt;
}

double default_constant(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::WhiteToBlack:
    case AttackKind::BlackToWhite:
      return 2.0;
    case AttackKind::RandomPixelInvert:
    case AttackKind::EdgeToAltered:
      break;
  }
  return 1.25;
}

void AttackSpec::validate() const {
  if (!std::isfinite(c) || !(c > 0.0)) {
    throw ContractViolation(fmt::format("attack constant c must be finite and > 0, got {}", c));
  }
}

std::uint8_t invert_bright(std::uint8_t b, double c) noexcept {
  return clamp_truncated((255.0 - static_cast<double>(b)) / c);
}

std::uint8_t invert_dark(std::uint8_t b, double c) noexcept {
  return clamp_truncated(255.0 - static_cast<double>(b) / c);
}

std::uint8_t attacked_value(AttackKind kind, std::uint8_t b, double c) noexcept {
  switch (kind) {
    case AttackKind::WhiteToBlack: return invert_bright(b, c);
    case AttackKind::BlackToWhite: return invert_dark(b, c);
    case AttackKind::RandomPixelInvert:
    case AttackKind::EdgeToAltered:
      break;
  }
  return is_bright(b) ? invert_bright(b, c) : invert_dark(b, c);
}

LogicalGrid::LogicalGrid(int rows, int cols, std::uint8_t fill)
    : rows_(rows), cols_(cols), values_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw ContractViolation("LogicalGrid: negative dimension");
}

LogicalGrid::LogicalGrid(int rows, int cols, std::vector<std::uint8_t> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows < 0 || cols < 0 || values_.size() != static_cast<std::size_t>(rows) * cols) {
    throw ContractViolation(
        fmt::format("LogicalGrid: {} values do not fill {}x{}", values_.size(), rows, cols));
  }
}

LogicalGrid LogicalGrid::from_canvas(std::span<const std::uint8_t> canvas, int width, int height) {
  if (width <= 0 || height <= 0 || width % 2 != 0 || height % 2 != 0 ||
      canvas.size() != static_cast<std::size_t>(width) * height) {
    throw ContractViolation(fmt::format("canvas {}x{} with {} pixels is not a 2x2-block canvas",
                                        width, height, canvas.size()));
  }
  const int rows = height / 2;
  const int cols = width / 2;
  std::vector<std::uint8_t> values(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    const std::uint8_t* top = canvas.data() + static_cast<std::size_t>(2 * i) * width;
    const std::uint8_t* bottom = top + width;
    for (int j = 0; j < cols; ++j) {
      const std::uint8_t v = top[2 * j];
      if (top[2 * j + 1] != v || bottom[2 * j] != v || bottom[2 * j + 1] != v) {
        throw ContractViolation(fmt::format("canvas block ({}, {}) is not uniform", i, j));
      }
      values[static_cast<std::size_t>(i) * cols + j] = v;
    }
  }
  return LogicalGrid(rows, cols, std::move(values));
}

void LogicalGrid::write_canvas(std::span<std::uint8_t> canvas) const {
  const int width = 2 * cols_;
  if (canvas.size() != static_cast<std::size_t>(width) * 2 * rows_) {
    throw ContractViolation("LogicalGrid::write_canvas: destination size mismatch");
  }
  for (int i = 0; i < rows_; ++i) {
    std::uint8_t* top = canvas.data() + static_cast<std::size_t>(2 * i) * width;
    std::uint8_t* bottom = top + width;
    for (int j = 0; j < cols_; ++j) {
      const std::uint8_t v = at(i, j);
      top[2 * j] = top[2 * j + 1] = bottom[2 * j] = bottom[2 * j + 1] = v;
    }
  }
}

GrayImage LogicalGrid::to_canvas() const {
  GrayImage out(2 * cols_, 2 * rows_);
  write_canvas(out.pixels);
  return out;
}

std::vector<Block> eligible_blocks(const LogicalGrid& grid, AttackKind kind) {
  std::vector<int> indices;
  collect_eligible(grid, kind, indices);
  return to_blocks(grid, indices);
}

std::vector<Block> edge_blocks(const LogicalGrid& grid) {
  std::vector<int> indices;
  collect_edges(grid, indices);
  return to_blocks(grid, indices);
}

std::optional<Block> apply_attack_step(LogicalGrid& grid, AttackKind kind, double c, SplitMix64& rng) {
  std::vector<int> scratch;
  return step_with(grid, kind, c, rng, scratch);
}

void perturb_grid(LogicalGrid& grid, const AttackSpec& spec, std::uint64_t seed) {
  spec.validate();
  SplitMix64 rng(seed);
  std::vector<int> scratch;
  scratch.reserve(grid.size());
  for (std::uint32_t step = 0; step < spec.count; ++step) {
    step_with(grid, spec.kind, spec.c, rng, scratch);
  }
}

void perturb_canvas(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int width,
                    int height, const AttackSpec& spec, std::uint64_t seed) {
  LogicalGrid grid = LogicalGrid::from_canvas(in, width, height);
  perturb_grid(grid, spec, seed);
  grid.write_canvas(out);
}

GrayImage perturb_image(const GrayImage& image, const AttackSpec& spec, std::uint64_t seed) {
  GrayImage out(image.width, image.height);
  perturb_canvas(image.pixels, out.pixels, image.width, image.height, spec, seed);
  return out;
}

}  // namespace noisebench
