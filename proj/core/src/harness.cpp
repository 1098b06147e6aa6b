#include "noisebench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<AttackKind> sorted_kinds(std::vector<AttackKind> kinds) {
  std::sort(kinds.begin(), kinds.end());
  return kinds;
}

AttackKind kind_from_json(const json& j) {
  if (!j.is_string()) throw FormatError("checkpoint: attack must be a string");
  const auto kind = parse_attack_kind(j.get<std::string>());
  if (!kind) throw FormatError(fmt::format("checkpoint: unknown attack '{}'", j.get<std::string>()));
  return *kind;
}

/// Evaluates one cell on `classifier`.
CellResult evaluate_cell(const CellKey& key, const ExperimentPlan& plan, const ImageSet& images,
                         std::size_t count, Classifier& classifier, std::vector<std::uint8_t>& buffer) {
  const AttackSpec spec = AttackSpec::with_default_constant(key.kind, key.level);
  const std::size_t px = images.image_pixels();
  CellResult result{key, count, 0};
  for (std::size_t first = 0; first < count; first += plan.batch_size) {
    const std::size_t n = std::min(plan.batch_size, count - first);
    buffer.resize(n * px);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t index = first + k;
      auto src = images.image(index);
      std::span<std::uint8_t> dst(buffer.data() + k * px, px);
      if (key.level == 0) {
        std::copy(src.begin(), src.end(), dst.begin());
      } else {
        const std::uint64_t seed =
            derive_seed({plan.master_seed, kind_id(key.kind), key.level, key.rep, index});
        perturb_canvas(src, dst, images.width(), images.height(), spec, seed);
      }
    }
    const auto labels = classifier.predict(buffer, n, images.height(), images.width());
    if (labels.size() != n) {
      throw ClassifierError(fmt::format("classifier returned {} labels for {} images", labels.size(), n));
    }
    for (std::size_t k = 0; k < n; ++k) {
      result.correct += labels[k] == images.label(first + k);
    }
  }
  return result;
}

}  // namespace

std::vector<std::uint32_t> arithmetic_levels(std::uint32_t start, std::uint32_t stop, std::uint32_t step) {
  if (step == 0) throw ContractViolation("level step must be positive");
  if (stop < start) throw ContractViolation("level stop must not be below start");
  std::vector<std::uint32_t> levels;
  for (std::uint64_t l = start; l <= stop; l += step) levels.push_back(static_cast<std::uint32_t>(l));
  return levels;
}

void ExperimentPlan::validate(std::size_t dataset_size) const {
  if (kinds.empty()) throw ContractViolation("plan: at least one attack kind is required");
  if (std::set<AttackKind>(kinds.begin(), kinds.end()).size() != kinds.size()) {
    throw ContractViolation("plan: attack kinds must be distinct");
  }
  if (levels.empty() || levels.front() != 0) throw ContractViolation("plan: levels must start at 0");
  if (std::adjacent_find(levels.begin(), levels.end(), std::greater_equal<>()) != levels.end()) {
    throw ContractViolation("plan: levels must be strictly increasing");
  }
  if (reps < 1) throw ContractViolation("plan: reps must be at least 1");
  if (batch_size < 1) throw ContractViolation("plan: batch size must be at least 1");
  if (subset > dataset_size) {
    throw ContractViolation(
        fmt::format("plan: subset {} exceeds the {} available images", subset, dataset_size));
  }
  if (images_per_cell(dataset_size) == 0) throw ContractViolation("plan: dataset is empty");
}

std::size_t ExperimentPlan::images_per_cell(std::size_t dataset_size) const {
  return subset == 0 ? dataset_size : std::min(subset, dataset_size);
}

AccuracyGrid AccuracyGrid::for_plan(const ExperimentPlan& plan, std::uint64_t images_per_cell,
                                    std::string classifier) {
  AccuracyGrid g;
  g.kinds = sorted_kinds(plan.kinds);
  g.levels = plan.levels;
  g.reps = plan.reps;
  g.images_per_cell = images_per_cell;
  g.master_seed = plan.master_seed;
  g.classifier = std::move(classifier);
  return g;
}

std::vector<CellKey> AccuracyGrid::expected_keys() const {
  std::vector<CellKey> keys;
  keys.reserve(kinds.size() * levels.size() * reps);
  for (AttackKind k : kinds) {
    for (std::uint32_t l : levels) {
      for (std::uint32_t r = 0; r < reps; ++r) keys.push_back({k, l, r});
    }
  }
  return keys;
}

std::vector<CellKey> AccuracyGrid::missing() const {
  std::vector<CellKey> out;
  for (const auto& key : expected_keys()) {
    if (!cells.contains(key)) out.push_back(key);
  }
  return out;
}

void AccuracyGrid::record(const CellResult& cell) {
  const auto& k = cell.key;
  if (std::find(kinds.begin(), kinds.end(), k.kind) == kinds.end() ||
      std::find(levels.begin(), levels.end(), k.level) == levels.end() || k.rep >= reps) {
    throw ContractViolation(fmt::format("cell ({}, {}, {}) is outside the plan", short_name(k.kind),
                                        k.level, k.rep));
  }
  if (cell.correct > cell.n) {
    throw ContractViolation(fmt::format("cell ({}, {}, {}): correct {} exceeds n {}",
                                        short_name(k.kind), k.level, k.rep, cell.correct, cell.n));
  }
  auto [it, inserted] = cells.emplace(k, cell);
  if (!inserted && !(it->second == cell)) {
    throw ContractViolation(fmt::format("cell ({}, {}, {}) recorded twice with different results",
                                        short_name(k.kind), k.level, k.rep));
  }
}

const CellResult& AccuracyGrid::at(const CellKey& key) const {
  auto it = cells.find(key);
  if (it == cells.end()) {
    throw ContractViolation(fmt::format("grid has no cell ({}, {}, {})", short_name(key.kind), key.level,
                                        key.rep));
  }
  return it->second;
}

AccuracyGrid run_experiment(const ExperimentPlan& plan, const ImageSet& images,
                            const ClassifierFactory& factory, const RunOptions& options) {
  plan.validate(images.size());
  if (images.width() % 2 != 0 || images.height() % 2 != 0) {
    throw ContractViolation("run_experiment: images must be upscaled canvases");
  }
  const std::size_t count = plan.images_per_cell(images.size());

  // The first classifier also names the grid.
  std::vector<std::unique_ptr<Classifier>> workers;
  workers.push_back(factory());
  AccuracyGrid grid = AccuracyGrid::for_plan(plan, count, workers.front()->name());

  for (const auto& done : options.completed) {
    if (done.n != count) {
      throw ContractViolation(fmt::format("resumed cell has n = {}, plan evaluates {} images", done.n, count));
    }
    grid.record(done);
  }
  const std::vector<CellKey> todo = grid.missing();
  if (todo.empty()) return grid;

  const unsigned threads =
      static_cast<unsigned>(std::clamp<std::size_t>(options.threads == 0 ? 1 : options.threads, 1, todo.size()));

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;

  auto work = [&](unsigned worker) {
    try {
      std::unique_ptr<Classifier> own;
      Classifier* classifier = nullptr;
      std::vector<std::uint8_t> buffer;
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= todo.size()) break;
        if (!classifier) {
          if (worker == 0) {
            classifier = workers.front().get();
          } else {
            own = factory();
            classifier = own.get();
          }
        }
        const CellResult result = evaluate_cell(todo[i], plan, images, count, *classifier, buffer);
        std::lock_guard lock(mutex);
        grid.record(result);
        if (options.on_cell) options.on_cell(result);
      }
    } catch (...) {
      std::lock_guard lock(mutex);
      if (!failure) failure = std::current_exception();
      stop.store(true);
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }

  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const ClassifierError& e) {
      throw ExperimentAborted(e.what(), grid);
    } catch (const ProtocolError& e) {
      throw ExperimentAborted(e.what(), grid);
    }
  }
  return grid;
}

const SummaryPoint& Summary::at(AttackKind kind, std::uint32_t level) const {
  auto it = points.find({kind, level});
  if (it == points.end()) {
    throw ContractViolation(fmt::format("summary has no point ({}, {})", short_name(kind), level));
  }
  return it->second;
}

bool Summary::has_level(std::uint32_t level) const {
  return std::find(levels.begin(), levels.end(), level) != levels.end();
}

Summary summarize(const AccuracyGrid& grid) {
  const auto missing = grid.missing();
  if (!missing.empty()) {
    const auto& k = missing.front();
    throw ContractViolation(fmt::format("cannot summarize an incomplete grid: {} missing cells, first ({}, {}, {})",
                                        missing.size(), short_name(k.kind), k.level, k.rep));
  }
  Summary s;
  s.classifier = grid.classifier;
  s.kinds = grid.kinds;
  s.levels = grid.levels;
  for (AttackKind kind : grid.kinds) {
    for (std::uint32_t level : grid.levels) {
      // Summed in sorted order so the result does not depend on rep order.
      std::vector<double> acc;
      for (std::uint32_t r = 0; r < grid.reps; ++r) acc.push_back(grid.at({kind, level, r}).accuracy());
      std::sort(acc.begin(), acc.end());
      double sum = 0.0;
      for (double a : acc) sum += a;
      const double mean = sum / grid.reps;
      double sq = 0.0;
      for (double a : acc) sq += (a - mean) * (a - mean);
      const double sd = grid.reps > 1 ? std::sqrt(sq / (grid.reps - 1)) : 0.0;
      s.points[{kind, level}] = SummaryPoint{kind, level, mean, sd, grid.reps};
    }
  }
  return s;
}

std::string checkpoint_header(const AccuracyGrid& g) {
  ordered_json j;
  j["type"] = "plan";
  std::vector<std::string> kinds;
  for (AttackKind k : g.kinds) kinds.emplace_back(short_name(k));
  j["attacks"] = kinds;
  j["levels"] = g.levels;
  j["reps"] = g.reps;
  j["images_per_cell"] = g.images_per_cell;
  if (g.master_seed) j["master_seed"] = *g.master_seed;
  j["classifier"] = g.classifier;
  return j.dump();
}

std::string checkpoint_line(const CellResult& cell) {
  ordered_json j;
  j["type"] = "cell";
  j["attack"] = short_name(cell.key.kind);
  j["level"] = cell.key.level;
  j["rep"] = cell.key.rep;
  j["n"] = cell.n;
  j["correct"] = cell.correct;
  return j.dump();
}

Checkpoint parse_checkpoint(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) break;  // interrupted final write
    if (nl > pos) lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw FormatError("checkpoint: missing plan header");

  Checkpoint cp;
  try {
    const json h = json::parse(lines.front());
    if (h.value("type", "") != "plan") throw FormatError("checkpoint: first line is not a plan header");
    for (const auto& a : h.at("attacks")) cp.grid.kinds.push_back(kind_from_json(a));
    cp.grid.kinds = sorted_kinds(cp.grid.kinds);
    cp.grid.levels = h.at("levels").get<std::vector<std::uint32_t>>();
    cp.grid.reps = h.at("reps").get<std::uint32_t>();
    cp.grid.images_per_cell = h.at("images_per_cell").get<std::uint64_t>();
    if (h.contains("master_seed")) cp.grid.master_seed = h["master_seed"].get<std::uint64_t>();
    cp.grid.classifier = h.value("classifier", "");
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const json c = json::parse(lines[i]);
      if (c.value("type", "") != "cell") {
        throw FormatError(fmt::format("checkpoint line {}: expected a cell record", i + 1));
      }
      CellResult r;
      r.key.kind = kind_from_json(c.at("attack"));
      r.key.level = c.at("level").get<std::uint32_t>();
      r.key.rep = c.at("rep").get<std::uint32_t>();
      r.n = c.at("n").get<std::uint64_t>();
      r.correct = c.at("correct").get<std::uint64_t>();
      cp.grid.record(r);
    }
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("checkpoint: {}", e.what()));
  } catch (const ContractViolation& e) {
    throw FormatError(fmt::format("checkpoint: {}", e.what()));
  }
  return cp;
}

bool same_plan(const AccuracyGrid& a, const AccuracyGrid& b) {
  return a.kinds == b.kinds && a.levels == b.levels && a.reps == b.reps &&
         a.images_per_cell == b.images_per_cell && a.master_seed == b.master_seed &&
         a.classifier == b.classifier;
}

}  // namespace noisebench
