#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "noisebench/dataset.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {

/// The numeric value is the kind id used in seed derivation.
enum class AttackKind : std::uint8_t {
  RandomPixelInvert = 0,
  WhiteToBlack = 1,
  BlackToWhite = 2,
  EdgeToAltered = 3,
};

inline constexpr std::array<AttackKind, 4> kAllAttackKinds = {
    AttackKind::RandomPixelInvert, AttackKind::WhiteToBlack, AttackKind::BlackToWhite,
    AttackKind::EdgeToAltered};

/// Column order of the summary table: WtB, BtW, RPI, EtA.
inline constexpr std::array<AttackKind, 4> kTableKindOrder = {
    AttackKind::WhiteToBlack, AttackKind::BlackToWhite, AttackKind::RandomPixelInvert,
    AttackKind::EdgeToAltered};

constexpr std::uint64_t kind_id(AttackKind kind) noexcept { return static_cast<std::uint64_t>(kind); }

/// "rpi", "wtb", "btw", "eta".
std::string_view short_name(AttackKind kind) noexcept;
/// "RPI", "WtB", "BtW", "EtA".
std::string_view table_label(AttackKind kind) noexcept;
std::string_view display_name(AttackKind kind) noexcept;
std::optional<AttackKind> parse_attack_kind(std::string_view name) noexcept;

/// 2 for the white/black attacks, 1.25 otherwise.
double default_constant(AttackKind kind) noexcept;

struct AttackSpec {
  AttackKind kind = AttackKind::RandomPixelInvert;
  std::uint32_t count = 0;
  double c = 1.25;

  static AttackSpec with_default_constant(AttackKind kind, std::uint32_t count) {
    return AttackSpec{kind, count, default_constant(kind)};
  }
  /// Throws ContractViolation unless c is finite and positive.
  void validate() const;
};

/// clamp(trunc((255 - b) / c), 0, 255).
std::uint8_t invert_bright(std::uint8_t b, double c) noexcept;
/// clamp(trunc(255 - b / c), 0, 255).
std::uint8_t invert_dark(std::uint8_t b, double c) noexcept;

struct Block {
  int row = 0;
  int col = 0;
  auto operator<=>(const Block&) const = default;
};

/// Block-level view of a canvas whose aligned 2x2 squares are uniform. Block
/// (i, j) stands for canvas rows 2i..2i+1, cols 2j..2j+1.
class LogicalGrid {
 public:
  LogicalGrid() = default;
  LogicalGrid(int rows, int cols, std::uint8_t fill = 0);
  LogicalGrid(int rows, int cols, std::vector<std::uint8_t> values);

  /// Throws ContractViolation if the canvas has odd dimensions or a
  /// non-uniform 2x2 block.
  static LogicalGrid from_canvas(std::span<const std::uint8_t> canvas, int width, int height);
  static LogicalGrid from_canvas(const GrayImage& canvas) {
    return from_canvas(canvas.pixels, canvas.width, canvas.height);
  }
  void write_canvas(std::span<std::uint8_t> canvas) const;
  GrayImage to_canvas() const;

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::uint8_t at(int row, int col) const { return values_[static_cast<std::size_t>(row) * cols_ + col]; }
  std::uint8_t at(Block b) const { return at(b.row, b.col); }
  void set(Block b, std::uint8_t value) { values_[static_cast<std::size_t>(b.row) * cols_ + b.col] = value; }
  std::span<const std::uint8_t> values() const noexcept { return values_; }

  bool operator==(const LogicalGrid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> values_;
};

/// Row-major blocks satisfying the kind's predicate on the current values:
/// all blocks (RPI), b > 0 (WtB), b < 100 (BtW), edge blocks (EtA).
std::vector<Block> eligible_blocks(const LogicalGrid& grid, AttackKind kind);

/// Row-major blocks with at least one in-bounds 8-neighbor on the other side
/// of the b > 127 threshold.
std::vector<Block> edge_blocks(const LogicalGrid& grid);

/// Replacement value the kind writes into a block with brightness b.
std::uint8_t attacked_value(AttackKind kind, std::uint8_t b, double c) noexcept;

/// One attack: pick a uniformly random eligible block and invert it. Returns
/// the block written, or nullopt when nothing was eligible (the attack still
/// counts).
std::optional<Block> apply_attack_step(LogicalGrid& grid, AttackKind kind, double c, SplitMix64& rng);

/// spec.count sequential attacks with a generator seeded by `seed`.
void perturb_grid(LogicalGrid& grid, const AttackSpec& spec, std::uint64_t seed);

/// Canvas-level entry point. `in` and `out` may alias. Throws ContractViolation
/// on non-uniform input.
void perturb_canvas(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, int width,
                    int height, const AttackSpec& spec, std::uint64_t seed);

GrayImage perturb_image(const GrayImage& image, const AttackSpec& spec, std::uint64_t seed);

}  // namespace noisebench
