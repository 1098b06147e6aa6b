#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noisebench/classifier.hpp"
#include "noisebench/dataset.hpp"
#include "noisebench/errors.hpp"
#include "noisebench/perturb.hpp"

namespace noisebench {

/// start, start + step, ..., up to and including stop. Throws ContractViolation
/// on step == 0 or stop < start.
std::vector<std::uint32_t> arithmetic_levels(std::uint32_t start, std::uint32_t stop, std::uint32_t step);

struct ExperimentPlan {
  std::vector<AttackKind> kinds{kAllAttackKinds.begin(), kAllAttackKinds.end()};
  std::vector<std::uint32_t> levels = arithmetic_levels(0, 200, 10);
  std::uint32_t reps = 5;
  std::size_t subset = 1000;  // 0 selects the whole set
  std::uint64_t master_seed = 42;
  std::size_t batch_size = kDefaultBridgeBatch;

  /// Levels must start at 0 and strictly increase, kinds must be distinct, and
  /// the subset must fit in the dataset. Throws ContractViolation.
  void validate(std::size_t dataset_size) const;
  std::size_t images_per_cell(std::size_t dataset_size) const;
};

struct CellKey {
  AttackKind kind = AttackKind::RandomPixelInvert;
  std::uint32_t level = 0;
  std::uint32_t rep = 0;
  auto operator<=>(const CellKey&) const = default;
};

struct CellResult {
  CellKey key;
  std::uint64_t n = 0;
  std::uint64_t correct = 0;
  double accuracy() const noexcept { return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n); }
  bool operator==(const CellResult&) const = default;
};

/// Accuracy per (kind, level, rep), plus an echo of the plan that produced it.
struct AccuracyGrid {
  std::vector<AttackKind> kinds;  // ascending kind id
  std::vector<std::uint32_t> levels;
  std::uint32_t reps = 0;
  std::uint64_t images_per_cell = 0;
  std::optional<std::uint64_t> master_seed;
  std::string classifier;
  std::map<CellKey, CellResult> cells;

  static AccuracyGrid for_plan(const ExperimentPlan& plan, std::uint64_t images_per_cell,
                               std::string classifier);

  /// Throws ContractViolation for cells outside the plan, correct > n, or a
  /// conflicting duplicate.
  void record(const CellResult& cell);
  std::vector<CellKey> expected_keys() const;
  std::vector<CellKey> missing() const;
  bool complete() const { return missing().empty(); }
  const CellResult& at(const CellKey& key) const;

  bool operator==(const AccuracyGrid&) const = default;
};

/// A classifier failure stopped the run; `partial` holds every finished cell.
class ExperimentAborted : public ClassifierError {
 public:
  ExperimentAborted(const std::string& what, AccuracyGrid partial)
      : ClassifierError(what), partial_(std::move(partial)) {}
  const AccuracyGrid& partial() const noexcept { return partial_; }

 private:
  AccuracyGrid partial_;
};

struct RunOptions {
  unsigned threads = 1;
  /// Cells already finished (checkpoint resume); they are not recomputed.
  std::vector<CellResult> completed{};
  /// Called once per newly finished cell, serialized.
  std::function<void(const CellResult&)> on_cell{};
};

/// Perturbs the first `images_per_cell` images of `images` with seed
/// derive_seed(master, kind, level, rep, index) and classifies them, for every
/// cell of the plan. Level 0 cells classify the clean images. Cells are
/// independent, so the result does not depend on thread count or order.
AccuracyGrid run_experiment(const ExperimentPlan& plan, const ImageSet& images,
                            const ClassifierFactory& factory, const RunOptions& options = {});

struct SummaryPoint {
  AttackKind kind = AttackKind::RandomPixelInvert;
  std::uint32_t level = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single rep
  std::uint32_t reps = 0;
};

struct Summary {
  std::string classifier;
  std::vector<AttackKind> kinds;
  std::vector<std::uint32_t> levels;
  std::map<std::pair<AttackKind, std::uint32_t>, SummaryPoint> points;

  const SummaryPoint& at(AttackKind kind, std::uint32_t level) const;
  bool has_level(std::uint32_t level) const;
};

/// Mean and (reps - 1)-divisor standard deviation over reps. Throws
/// ContractViolation on an incomplete grid.
Summary summarize(const AccuracyGrid& grid);

/// Checkpoint files: one plan header line, then one line per finished cell.
std::string checkpoint_header(const AccuracyGrid& plan_echo);
std::string checkpoint_line(const CellResult& cell);

struct Checkpoint {
  AccuracyGrid grid;  // plan echo plus whatever cells were recorded
};

/// Throws FormatError on a malformed header or cell line. A final line
/// without its newline (interrupted write) is ignored.
Checkpoint parse_checkpoint(std::string_view text);

/// True when two grids describe the same plan (cells are not compared).
bool same_plan(const AccuracyGrid& a, const AccuracyGrid& b);

}  // namespace noisebench
